use std::collections::VecDeque;
use std::time::Instant;

use crate::mdp::{Mdp, StateId};
use crate::reachability::{AbsorbingDecomposition, SupportGraph};

use super::rvi::solve_absorbing_subspace;
use super::{backup, elapsed_nanos, SolveError, SolveResult, SolveStats, SolverConfig};

/// Backward value iteration.
///
/// After the absorbing set is solved, the one-step predecessors of it are
/// queued. Each dequeued state is backed up; on its first backup, or when its
/// value moves by more than `epsilon`, its transient predecessors (itself
/// included, for self-loops) are queued unless already waiting.
///
/// `stats.sweeps` is the largest number of backups any single state received.
pub fn bvi_solve(mdp: &Mdp, decomp: &AbsorbingDecomposition, cfg: &SolverConfig) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    cfg.validate()?;
    if decomp.absorbing.is_empty() {
        return Err(SolveError::NotReductive);
    }
    let absorbing = solve_absorbing_subspace(mdp, decomp, cfg)?;
    let mut values = absorbing.values;
    let mut policy = absorbing.policy;

    let n = mdp.state_count();
    let is_abs = decomp.absorbing_mask(n);
    let rev = SupportGraph::union_of(mdp).reversed();

    let mut queued = vec![false; n];
    let mut backups = vec![0u64; n];
    let mut queue = VecDeque::new();
    for &a in &decomp.absorbing {
        for &p in rev.successors(a) {
            if !is_abs[p.index()] && !queued[p.index()] {
                queued[p.index()] = true;
                queue.push_back(p);
            }
        }
    }

    let cap = cfg.max_sweeps.saturating_mul(n as u64).saturating_mul(mdp.action_count().max(1) as u64);
    let mut stats = SolveStats {
        absorbing_shortcut: absorbing.shortcut,
        absorbing_updates: absorbing.q_updates,
        ..SolveStats::default()
    };
    let mut last_change = vec![0.0f64; n];
    let mut dequeues = 0u64;

    while let Some(x) = queue.pop_front() {
        let i = x.index();
        queued[i] = false;
        dequeues += 1;
        if dequeues > cap {
            let residual = last_change.iter().copied().fold(0.0, f64::max);
            return Err(SolveError::MaxSweepsExceeded { sweeps: backups.iter().copied().max().unwrap_or(0), residual });
        }
        let (best, u) = backup(mdp, &values.v, &mut values.q, x);
        let pairs = mdp.pairs(x);
        stats.q_updates += pairs.len() as u64;
        stats.successor_reads += pairs.map(|k| mdp.row(k).len() as u64).sum::<u64>();
        let change = (best - values.v[i]).abs();
        let first = backups[i] == 0;
        backups[i] += 1;
        last_change[i] = change;
        values.v[i] = best;
        policy.choice[i] = u;
        if first || change > cfg.epsilon {
            enqueue_predecessors(&rev, x, &is_abs, &mut queued, &mut queue);
        }
    }

    stats.sweeps = backups.iter().copied().max().unwrap_or(0);
    stats.residual = last_change.iter().copied().fold(absorbing.residual, f64::max);
    stats.converged = true;
    stats.wall_nanos = elapsed_nanos(start);
    Ok(SolveResult { values, policy, stats })
}

#[inline]
fn enqueue_predecessors(
    rev: &SupportGraph,
    x: StateId,
    is_abs: &[bool],
    queued: &mut [bool],
    queue: &mut VecDeque<StateId>,
) {
    for &p in rev.successors(x) {
        if !is_abs[p.index()] && !queued[p.index()] {
            queued[p.index()] = true;
            queue.push_back(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionId, MdpBuilder};

    fn s(i: u32) -> StateId {
        StateId(i)
    }

    #[test]
    fn path_is_solved_with_one_backup_per_state() {
        let mut b = MdpBuilder::new(1, 1.0);
        for (x, r) in [(1u32, -1.0), (2, -1.0), (2, 0.0)] {
            b.add_state();
            b.add_action(ActionId(0));
            b.add_transition(s(x), 1.0, r);
        }
        let m = b.build().unwrap();
        let d =
            AbsorbingDecomposition { transient: vec![s(0), s(1)], absorbing: vec![s(2)], classes: vec![vec![s(2)]] };
        let r = bvi_solve(&m, &d, &SolverConfig::default()).unwrap();
        assert_eq!(r.values.v, vec![-2.0, -1.0, 0.0]);
        assert_eq!(r.stats.sweeps, 1);
        assert_eq!(r.stats.q_updates, 2);
    }

    #[test]
    fn self_loop_converges_geometrically() {
        // 0 stays w.p. 1/2, else moves to absorbing 1, reward 1 per step
        let mut b = MdpBuilder::new(1, 1.0);
        b.add_state();
        b.add_action(ActionId(0));
        b.add_transition(s(0), 0.5, 1.0);
        b.add_transition(s(1), 0.5, 1.0);
        b.add_state();
        b.add_action(ActionId(0));
        b.add_transition(s(1), 1.0, 0.0);
        let m = b.build().unwrap();
        let d = AbsorbingDecomposition { transient: vec![s(0)], absorbing: vec![s(1)], classes: vec![vec![s(1)]] };
        let r = bvi_solve(&m, &d, &SolverConfig::default()).unwrap();
        assert!((r.values.v[0] - 2.0).abs() < 1e-9);
        assert!(r.stats.sweeps > 10);
    }
}
