use std::path::Path;

use anyhow::Context;
use reductive::domains::{
    build_fig2, build_liquidation, build_spiral, shrink_simulate, DomainModel, Fig2Variant, LiquidationParams,
    LiquidationState, ShrinkMode, ShrinkParams, DEFAULT_MIX_LEVELS,
};
use reductive::mdp::{Mdp, Policy};
use reductive::reachability::{
    canonical_order, certify_mdp, mdp_level_sets, reachable_set_in, AbsorbingDecomposition, LevelSetSchedule,
    ReachError, Violation,
};
use reductive::solvers::{
    bvi_solve, qvi_solve, rvi_solve_with, simulate_policy, SolveError, SolveResult, SolverConfig, SweepOrdering,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{emit, emit_json, float, Csv};
use crate::{
    BenchArgs, DomainKind, Failure, ModelArgs, PolicyGridArgs, PolicyKind, ShrinkArgs, ShrinkKind, SimulateArgs,
    SolveArgs, SolverKind,
};

fn solve_failure(e: SolveError) -> Failure {
    match e {
        SolveError::NotReductive => Failure::not_reductive(e),
        SolveError::InvalidConfig(_) => Failure::input(e),
        _ => Failure::solver(e),
    }
}

fn reach_failure(e: ReachError) -> Failure {
    Failure::not_reductive(e)
}

/// A model plus, for built-in domains, the schedule shipped with it.
struct Loaded {
    mdp: Mdp,
    structure: Option<(LevelSetSchedule, AbsorbingDecomposition)>,
}

impl Loaded {
    fn from_domain(d: DomainModel) -> Self {
        Loaded { mdp: d.mdp, structure: Some((d.schedule, d.decomposition)) }
    }

    fn structure(&mut self) -> Result<&(LevelSetSchedule, AbsorbingDecomposition), Failure> {
        if self.structure.is_none() {
            self.structure = Some(mdp_level_sets(&self.mdp).map_err(reach_failure)?);
        }
        Ok(self.structure.as_ref().expect("just filled"))
    }
}

fn load(args: &ModelArgs, config: &RunConfig) -> Result<Loaded, Failure> {
    if let Some(path) = &args.model {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::input)?;
        let mdp =
            Mdp::from_json(&text).with_context(|| format!("loading {}", path.display())).map_err(Failure::input)?;
        return Ok(Loaded { mdp, structure: None });
    }
    let kind = args.domain.expect("clap requires --domain or --model");
    let loaded = match kind {
        DomainKind::Liquidation => {
            let p = config.liquidation(args.q_max, args.w1, &args.market);
            Loaded::from_domain(build_liquidation(&p).map_err(Failure::input)?)
        }
        DomainKind::Spiral => {
            let spiral = config.spiral.clone().unwrap_or_default();
            let step = args.step_reward.or(spiral.step_reward).unwrap_or(-1.0);
            let mix = args.mix_levels.clone().or(spiral.mix_levels).unwrap_or_else(|| DEFAULT_MIX_LEVELS.to_vec());
            Loaded::from_domain(build_spiral(step, &mix).map_err(Failure::input)?)
        }
        DomainKind::Fig2a | DomainKind::Fig2b => {
            let variant = if kind == DomainKind::Fig2a { Fig2Variant::A } else { Fig2Variant::B };
            let chain =
                build_fig2(variant, args.loop_prob.or(config.loop_prob).unwrap_or(0.5)).map_err(Failure::input)?;
            let discount = args.market.discount.unwrap_or(1.0);
            Loaded { mdp: Mdp::from_chain(&chain, discount).map_err(Failure::input)?, structure: None }
        }
    };
    Ok(loaded)
}

fn run_solver(kind: SolverKind, loaded: &mut Loaded, cfg: &SolverConfig) -> Result<SolveResult, Failure> {
    let result = match kind {
        SolverKind::Qvi => {
            qvi_solve(&loaded.mdp, &SolverConfig { ordering: SweepOrdering::Natural, ..cfg.clone() }, None)
        }
        SolverKind::Rvi => {
            let (schedule, decomp) = loaded.structure()?.clone();
            rvi_solve_with(&loaded.mdp, &schedule, &decomp, cfg)
        }
        SolverKind::QviRandom | SolverKind::QviReversed => {
            let ordering = if kind == SolverKind::QviRandom {
                SweepOrdering::RandomPerSweep
            } else {
                SweepOrdering::ReversedLevelSets
            };
            let schedule = loaded.structure()?.0.clone();
            qvi_solve(&loaded.mdp, &SolverConfig { ordering, ..cfg.clone() }, Some(&schedule))
        }
        SolverKind::Bvi => {
            let decomp = loaded.structure()?.1.clone();
            bvi_solve(&loaded.mdp, &decomp, cfg)
        }
    };
    result.map_err(solve_failure)
}

pub fn solve(args: &SolveArgs, config: &RunConfig, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let mut loaded = load(&args.model, config)?;
    let cfg = config.solver(&args.tuning, seed);
    cfg.validate().map_err(Failure::input)?;
    let result = run_solver(args.solver, &mut loaded, &cfg)?;
    emit_json(out, &result.export())
}

#[derive(Serialize)]
struct VerifyOutput {
    reductive: bool,
    violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transient_len: Option<usize>,
}

pub fn verify(args: &ModelArgs, config: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let loaded = load(args, config)?;
    let cert = certify_mdp(&loaded.mdp);
    let perm = if cert.verdict.reductive && cert.union_consistent {
        let a = &cert.analysis;
        Some(canonical_order(&cert.graph, &a.decomposition, &a.potentials).map_err(reach_failure)?)
    } else {
        None
    };
    emit_json(
        out,
        &VerifyOutput {
            reductive: cert.verdict.reductive,
            violations: cert.verdict.violations,
            order: perm.as_ref().map(|p| p.order.iter().map(|x| x.0).collect()),
            transient_len: perm.map(|p| p.transient_len),
        },
    )
}

pub fn bench(args: &BenchArgs, config: &RunConfig, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    if !args.solvers.contains(&SolverKind::Rvi) {
        return Err(Failure::input(anyhow::anyhow!("the solver list must include rvi, the reference")));
    }
    let repeats = args.repeats.or(config.repeats).unwrap_or(1);
    if repeats == 0 {
        return Err(Failure::input(anyhow::anyhow!("repeats must be at least 1")));
    }
    let cfg = config.solver(&args.tuning, seed);
    cfg.validate().map_err(Failure::input)?;
    let base = config.liquidation.clone().unwrap_or(LiquidationParams {
        z_min: 40,
        z_max: 260,
        ..LiquidationParams::default()
    });

    let mut csv = Csv::new("solver,q_max,states,q_updates,sweeps,wall_nanos,vmax_err");
    for &q_max in &args.q_max {
        let p = crate::config::apply_flags(base.clone(), Some(q_max), args.w1, &args.market);
        let mut loaded = Loaded::from_domain(build_liquidation(&p).map_err(Failure::input)?);
        let reference = run_solver(SolverKind::Rvi, &mut loaded, &cfg)?.values.v;
        for &solver in &args.solvers {
            for _ in 0..repeats {
                let r = run_solver(solver, &mut loaded, &cfg)?;
                let err = r.values.v.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                csv.row(&[
                    &solver.name(),
                    &q_max,
                    &loaded.mdp.state_count(),
                    &r.stats.q_updates,
                    &r.stats.sweeps,
                    &r.stats.wall_nanos,
                    &float(err),
                ]);
            }
        }
    }
    emit(out, &csv.finish())
}

pub fn simulate(args: &SimulateArgs, config: &RunConfig, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let cfg = config.solver(&args.tuning, seed);
    cfg.validate().map_err(Failure::input)?;
    if args.trials == 0 {
        return Err(Failure::input(anyhow::anyhow!("trials must be at least 1")));
    }
    let mut csv = Csv::new("w1,t,mean_q,stderr_q");
    for &w1 in &args.w1 {
        let p = config.liquidation(args.q_max, Some(w1), &args.market);
        let mut loaded = Loaded::from_domain(build_liquidation(&p).map_err(Failure::input)?);
        let policy = match args.policy {
            PolicyKind::Optimal => run_solver(args.solver, &mut loaded, &cfg)?.policy,
            PolicyKind::SellAll => {
                Policy { choice: loaded.mdp.states().map(|x| *loaded.mdp.mask(x).last().expect("non-empty")).collect() }
            }
        };
        let start = p.encode(LiquidationState { q: p.q_max, z: p.z0 });
        let runs =
            simulate_policy(&loaded.mdp, &policy, start, args.horizon, args.trials, seed).map_err(Failure::input)?;
        for t in 0..=args.horizon {
            let qs: Vec<f64> = runs
                .iter()
                .map(|run| p.decode(*run.states.get(t).unwrap_or(run.states.last().expect("non-empty"))).q as f64)
                .collect();
            let n = qs.len() as f64;
            let mean = qs.iter().sum::<f64>() / n;
            let stderr = if qs.len() > 1 {
                (qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            csv.row(&[&float(w1), &t, &float(mean), &float(stderr)]);
        }
    }
    emit(out, &csv.finish())
}

pub fn policy_grid(args: &PolicyGridArgs, config: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let p = config.liquidation(args.q_max, args.w1, &args.market);
    let mut loaded = Loaded::from_domain(build_liquidation(&p).map_err(Failure::input)?);
    let cfg = config.solver(&Default::default(), 0);
    let result = run_solver(SolverKind::Rvi, &mut loaded, &cfg)?;
    let graph = reductive::reachability::SupportGraph::union_of(&loaded.mdp);
    let mut reachable = vec![false; loaded.mdp.state_count()];
    for x in reachable_set_in(&graph, p.encode(LiquidationState { q: p.q_max, z: p.z0 })) {
        reachable[x.index()] = true;
    }
    let mut csv = Csv::new("q,z,u,reachable");
    for x in loaded.mdp.states() {
        let s = p.decode(x);
        csv.row(&[&s.q, &s.z, &result.policy.action(x), &u8::from(reachable[x.index()])]);
    }
    emit(out, &csv.finish())
}

pub fn shrink(args: &ShrinkArgs, config: &RunConfig, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let mut p = config.shrink.clone().unwrap_or(ShrinkParams {
        trials: 10_000,
        steps: 100,
        seed: config.seed.unwrap_or(0),
        mode: ShrinkMode::Multiplicative,
    });
    if let Some(s) = seed {
        p.seed = s;
    }
    if let Some(t) = args.trials {
        p.trials = t;
    }
    if let Some(s) = args.steps {
        p.steps = s;
    }
    match (args.mode, args.delta) {
        (Some(ShrinkKind::Multiplicative), _) => p.mode = ShrinkMode::Multiplicative,
        (Some(ShrinkKind::Delta), Some(delta)) => p.mode = ShrinkMode::DeltaInterval { delta },
        (Some(ShrinkKind::Delta), None) => match p.mode {
            ShrinkMode::DeltaInterval { .. } => {}
            ShrinkMode::Multiplicative => {
                return Err(Failure::input(anyhow::anyhow!("--mode delta needs --delta")));
            }
        },
        (None, Some(delta)) => match p.mode {
            ShrinkMode::DeltaInterval { .. } => p.mode = ShrinkMode::DeltaInterval { delta },
            ShrinkMode::Multiplicative => return Err(Failure::input(anyhow::anyhow!("--delta needs --mode delta"))),
        },
        (None, None) => {}
    }
    let summary = shrink_simulate(&p).map_err(Failure::input)?;
    emit_json(out, &summary)
}
