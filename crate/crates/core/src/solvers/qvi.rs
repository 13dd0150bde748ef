use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mdp::{Mdp, Policy, StateId, ValueTable};
use crate::reachability::{mdp_level_sets, LevelSetSchedule};

use super::{backup, elapsed_nanos, SolveError, SolveResult, SolveStats, SolverConfig, SweepOrdering};

/// Gauss-Seidel value iteration from `v = 0`.
///
/// `levels` is only consulted by the level-based orderings; when it is
/// `None` the level sets are derived from the model.
pub fn qvi_solve(mdp: &Mdp, cfg: &SolverConfig, levels: Option<&LevelSetSchedule>) -> Result<SolveResult, SolveError> {
    qvi_solve_from(mdp, cfg, levels, &vec![0.0; mdp.state_count()])
}

/// Gauss-Seidel value iteration warm-started from `init`. Stops after the
/// first sweep whose largest value change is below `epsilon`.
pub fn qvi_solve_from(
    mdp: &Mdp,
    cfg: &SolverConfig,
    levels: Option<&LevelSetSchedule>,
    init: &[f64],
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    cfg.validate()?;
    if init.len() != mdp.state_count() {
        return Err(SolveError::InvalidConfig(format!(
            "warm start has {} values for {} states",
            init.len(),
            mdp.state_count()
        )));
    }
    let mut blocks = sweep_blocks(mdp, cfg.ordering, levels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut values = ValueTable::zeros(mdp);
    values.v.copy_from_slice(init);
    let mut policy = Policy::first_admissible(mdp);
    let mut stats = SolveStats::default();

    loop {
        if cfg.ordering == SweepOrdering::RandomPerSweep {
            blocks.shuffle(&mut rng);
        }
        let mut residual = 0.0f64;
        for block in &blocks {
            for &x in block {
                let (best, u) = backup(mdp, &values.v, &mut values.q, x);
                let pairs = mdp.pairs(x);
                stats.q_updates += pairs.len() as u64;
                stats.successor_reads += pairs.map(|k| mdp.row(k).len() as u64).sum::<u64>();
                residual = residual.max((best - values.v[x.index()]).abs());
                values.v[x.index()] = best;
                policy.choice[x.index()] = u;
            }
        }
        stats.sweeps += 1;
        stats.residual = residual;
        if residual < cfg.epsilon {
            stats.converged = true;
            break;
        }
        if stats.sweeps >= cfg.max_sweeps {
            return Err(SolveError::MaxSweepsExceeded { sweeps: stats.sweeps, residual });
        }
    }
    stats.wall_nanos = elapsed_nanos(start);
    Ok(SolveResult { values, policy, stats })
}

/// State blocks visited in one sweep, before any per-sweep shuffling.
fn sweep_blocks(
    mdp: &Mdp,
    ordering: SweepOrdering,
    levels: Option<&LevelSetSchedule>,
) -> Result<Vec<Vec<StateId>>, SolveError> {
    if ordering == SweepOrdering::Natural {
        return Ok(vec![mdp.states().collect()]);
    }
    let owned;
    let levels = match levels {
        Some(l) => l,
        None => {
            owned = mdp_level_sets(mdp)?.0;
            &owned
        }
    };
    let mut scheduled = vec![false; mdp.state_count()];
    for x in levels.iter_states() {
        scheduled[x.index()] = true;
    }
    let rest: Vec<StateId> = mdp.states().filter(|x| !scheduled[x.index()]).collect();

    let mut blocks: Vec<Vec<StateId>> = levels.levels.clone();
    if ordering == SweepOrdering::ReversedLevelSets {
        blocks.reverse();
    }
    if !rest.is_empty() {
        blocks.push(rest);
    }
    Ok(blocks)
}
