use std::path::Path;

use anyhow::Context;
use reductive::domains::{LiquidationParams, ShrinkParams};
use serde::Deserialize;

use crate::{MarketArgs, SolverArgs};

/// Contents of `--config`. Every field is optional; flags override it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_sweeps: Option<u64>,
    pub liquidation: Option<LiquidationParams>,
    pub spiral: Option<SpiralConfig>,
    pub loop_prob: Option<f64>,
    pub shrink: Option<ShrinkParams>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpiralConfig {
    pub step_reward: Option<f64>,
    pub mix_levels: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Liquidation parameters: defaults, then the config, then flags.
    pub fn liquidation(&self, q_max: Option<u32>, w1: Option<f64>, m: &MarketArgs) -> LiquidationParams {
        apply_flags(self.liquidation.clone().unwrap_or_default(), q_max, w1, m)
    }

    pub fn solver(&self, args: &SolverArgs, seed: u64) -> reductive::solvers::SolverConfig {
        let mut cfg = reductive::solvers::SolverConfig { seed, ..Default::default() };
        if let Some(e) = args.epsilon.or(self.epsilon) {
            cfg.epsilon = e;
        }
        if let Some(m) = args.max_sweeps.or(self.max_sweeps) {
            cfg.max_sweeps = m;
        }
        cfg
    }
}

/// Overrides the fields of `p` that were given on the command line.
pub fn apply_flags(mut p: LiquidationParams, q_max: Option<u32>, w1: Option<f64>, m: &MarketArgs) -> LiquidationParams {
    macro_rules! apply {
            ($($field:ident <- $value:expr),* $(,)?) => {
                $(if let Some(v) = $value { p.$field = v; })*
            };
        }
    apply!(
        q_max <- q_max,
        w1 <- w1,
        z_min <- m.z_min,
        z_max <- m.z_max,
        z0 <- m.z0,
        p_down <- m.p_down,
        p_stay <- m.p_stay,
        p_up <- m.p_up,
        w0 <- m.w0,
        w2 <- m.w2,
        discount <- m.discount,
    );
    p
}
