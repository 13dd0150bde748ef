//! Shrinking-intervals process on `[0, 1]`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::solvers::trial_rng;

use super::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShrinkMode {
    /// `X' = Y X` with `Y ~ U[0, 1)`.
    Multiplicative,
    /// `X' ~ U[0, max(X - delta, 0)]`.
    DeltaInterval { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShrinkParams {
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    pub mode: ShrinkMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkSummary {
    pub final_abs: Vec<f64>,
    pub max_final: f64,
    pub all_monotone: bool,
}

impl ShrinkParams {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.trials == 0 || self.steps == 0 {
            return Err(DomainError::InvalidParams("trials and steps must be at least 1".into()));
        }
        if let ShrinkMode::DeltaInterval { delta } = self.mode {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(DomainError::InvalidParams(format!("delta {delta} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// One transition from `x` driven by a uniform draw `u01` in `[0, 1)`.
#[inline]
pub fn shrink_step(mode: ShrinkMode, x: f64, u01: f64) -> f64 {
    match mode {
        ShrinkMode::Multiplicative => u01 * x,
        ShrinkMode::DeltaInterval { delta } => u01 * (x - delta).max(0.0),
    }
}

/// Runs every trial from `X_0 = 1`; trial `i` draws from stream `i` of the
/// seeded generator.
pub fn shrink_simulate(params: &ShrinkParams) -> Result<ShrinkSummary, DomainError> {
    params.validate()?;
    let runs: Vec<(f64, bool)> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(params.seed, trial);
            let mut x = 1.0f64;
            let mut monotone = true;
            for _ in 0..params.steps {
                let next = shrink_step(params.mode, x, rng.random::<f64>());
                monotone &= next <= x;
                x = next;
            }
            (x.abs(), monotone)
        })
        .collect();
    let max_final = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    let all_monotone = runs.iter().all(|r| r.1);
    Ok(ShrinkSummary { final_abs: runs.into_iter().map(|r| r.0).collect(), max_final, all_monotone })
}

/// Expected one-step decrease `x - E[X' | X = x] = (x + delta) / 2` of the
/// identity potential when `X'` is uniform on `[0, x - delta]`.
pub fn shrink_expected_drift(x: f64, delta: f64) -> Result<f64, DomainError> {
    if !(delta >= 0.0 && x > delta && x <= 1.0) {
        return Err(DomainError::OutOfDomain(format!("need 0 <= delta < x <= 1, got x = {x}, delta = {delta}")));
    }
    Ok((x + delta) / 2.0)
}
