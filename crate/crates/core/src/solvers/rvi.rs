use std::time::Instant;

use crate::mdp::{ActionId, Mdp, Policy, StateId, ValueTable};
use crate::reachability::{AbsorbingDecomposition, LevelSetSchedule};

use super::{backup, elapsed_nanos, SolveError, SolveResult, SolveStats, SolverConfig};

/// Closed-form action value of `(x, u)` given final values for every
/// successor other than `x`:
///
/// `q = (r(x,u) + gamma * sum_{x' != x} p(x'|x,u) v(x')) / (1 - gamma * p(x|x,u))`
///
/// which is the fixed point of repeating `u` for as long as the chain stays
/// in `x`.
pub fn q_update(mdp: &Mdp, v: &[f64], x: StateId, u: ActionId) -> Result<f64, SolveError> {
    let k = mdp
        .pair_index(x, u)
        .ok_or_else(|| SolveError::InvalidConfig(format!("action {u} is not admissible in {x}")))?;
    closed_form(mdp, v, x, k, None).map(|(q, _)| q)
}

/// Returns the value and the number of successor entries read. When `solved`
/// is given, every successor other than `x` must be marked.
#[inline]
fn closed_form(
    mdp: &Mdp,
    v: &[f64],
    x: StateId,
    k: usize,
    solved: Option<&[bool]>,
) -> Result<(f64, usize), SolveError> {
    let gamma = mdp.discount();
    let row = mdp.row(k);
    let mut stay = 0.0;
    let mut reward = 0.0;
    let mut exit = 0.0;
    for e in row {
        reward += e.prob * e.reward;
        if e.next == x {
            stay += e.prob;
        } else {
            if let Some(solved) = solved {
                if !solved[e.next.index()] {
                    return Err(SolveError::ScheduleMismatch { x, xp: e.next });
                }
            }
            exit += e.prob * v[e.next.index()];
        }
    }
    let denom = 1.0 - gamma * stay;
    if denom <= 0.0 {
        return Err(SolveError::DivergentSelfLoop { x, u: mdp.pair_action(k) });
    }
    Ok(((reward + gamma * exit) / denom, row.len()))
}

/// Values, greedy actions and bookkeeping for the absorbing set.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbingSolution {
    /// Full-size tables; entries outside the absorbing set are zero.
    pub values: ValueTable,
    pub policy: Policy,
    pub shortcut: bool,
    pub q_updates: u64,
    pub sweeps: u64,
    pub residual: f64,
}

/// Solves the absorbing set. Zero rewards everywhere on it give `v = 0`
/// without any backups; otherwise each class is solved by Gauss-Seidel value
/// iteration to the configured residual.
pub fn solve_absorbing_subspace(
    mdp: &Mdp,
    decomp: &AbsorbingDecomposition,
    cfg: &SolverConfig,
) -> Result<AbsorbingSolution, SolveError> {
    cfg.validate()?;
    let mut values = ValueTable::zeros(mdp);
    let mut policy = Policy::first_admissible(mdp);
    let zero = |x: StateId| mdp.pairs(x).all(|k| mdp.row(k).iter().all(|e| e.reward == 0.0));

    if decomp.absorbing.iter().all(|&x| zero(x)) {
        return Ok(AbsorbingSolution { values, policy, shortcut: true, q_updates: 0, sweeps: 0, residual: 0.0 });
    }

    let gamma = mdp.discount();
    let (mut q_updates, mut max_sweeps_used, mut residual_out) = (0u64, 0u64, 0.0f64);
    for class in &decomp.classes {
        if class.iter().all(|&x| zero(x)) {
            continue;
        }
        if gamma >= 1.0 {
            return Err(SolveError::NonContractive { x: class[0] });
        }
        let mut sweeps = 0u64;
        loop {
            let mut residual = 0.0f64;
            for &x in class {
                let (best, u) = backup(mdp, &values.v, &mut values.q, x);
                q_updates += mdp.pairs(x).len() as u64;
                residual = residual.max((best - values.v[x.index()]).abs());
                values.v[x.index()] = best;
                policy.choice[x.index()] = u;
            }
            sweeps += 1;
            if residual <= cfg.epsilon {
                residual_out = residual_out.max(residual);
                break;
            }
            if sweeps >= cfg.max_sweeps {
                return Err(SolveError::MaxSweepsExceeded { sweeps, residual });
            }
        }
        max_sweeps_used = max_sweeps_used.max(sweeps);
    }
    Ok(AbsorbingSolution {
        values,
        policy,
        shortcut: false,
        q_updates,
        sweeps: max_sweeps_used,
        residual: residual_out,
    })
}

/// Reductive value iteration with default solver settings for the absorbing set.
pub fn rvi_solve(
    mdp: &Mdp,
    schedule: &LevelSetSchedule,
    decomp: &AbsorbingDecomposition,
) -> Result<SolveResult, SolveError> {
    rvi_solve_with(mdp, schedule, decomp, &SolverConfig::default())
}

/// Solves the absorbing set, then evaluates every admissible pair of every
/// transient state exactly once, level by level in ascending potential.
///
/// A level may only read states solved in earlier levels (or absorbing
/// states); anything else is reported as a schedule mismatch.
pub fn rvi_solve_with(
    mdp: &Mdp,
    schedule: &LevelSetSchedule,
    decomp: &AbsorbingDecomposition,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    if decomp.absorbing.is_empty() {
        return Err(SolveError::NotReductive);
    }
    let absorbing = solve_absorbing_subspace(mdp, decomp, cfg)?;
    let AbsorbingSolution { mut values, mut policy, .. } = absorbing;
    let mut solved = decomp.absorbing_mask(mdp.state_count());
    let mut q_updates = 0u64;
    let mut reads = 0u64;

    for level in &schedule.levels {
        for &x in level {
            if solved[x.index()] {
                return Err(SolveError::ScheduleMismatch { x, xp: x });
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_u = ActionId(0);
            for k in mdp.pairs(x) {
                let (q, read) = closed_form(mdp, &values.v, x, k, Some(&solved))?;
                values.q[k] = q;
                q_updates += 1;
                reads += read as u64;
                if q > best {
                    best = q;
                    best_u = mdp.pair_action(k);
                }
            }
            values.v[x.index()] = best;
            policy.choice[x.index()] = best_u;
        }
        for &x in level {
            solved[x.index()] = true;
        }
    }
    if let Some(x) = solved.iter().position(|&s| !s) {
        return Err(SolveError::UnscheduledState { x: StateId::new(x) });
    }

    let stats = SolveStats {
        q_updates,
        sweeps: 1,
        wall_nanos: elapsed_nanos(start),
        converged: true,
        residual: absorbing.residual,
        successor_reads: reads,
        absorbing_shortcut: absorbing.shortcut,
        absorbing_updates: absorbing.q_updates,
    };
    Ok(SolveResult { values, policy, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;

    fn s(i: u32) -> StateId {
        StateId(i)
    }

    /// x = 0 loops with `alpha`, otherwise exits to absorbing 1; reward `r`
    /// on every transition out of 0.
    fn loop_exit(alpha: f64, r: f64, gamma: f64) -> Mdp {
        let mut b = MdpBuilder::new(1, gamma);
        b.add_state();
        b.add_action(ActionId(0));
        if alpha > 0.0 {
            b.add_transition(s(0), alpha, r);
        }
        if alpha < 1.0 {
            b.add_transition(s(1), 1.0 - alpha, r);
        }
        b.add_state();
        b.add_action(ActionId(0));
        b.add_transition(s(1), 1.0, 0.0);
        b.build().unwrap()
    }

    #[test]
    fn no_self_loop_reduces_to_one_step_lookahead() {
        let m = loop_exit(0.0, 1.0, 0.9);
        assert_eq!(q_update(&m, &[0.0, 0.0], s(0), ActionId(0)).unwrap(), 1.0);
    }

    #[test]
    fn half_self_loop_matches_geometric_series() {
        let m = loop_exit(0.5, 1.0, 0.9);
        let q = q_update(&m, &[0.0, 0.0], s(0), ActionId(0)).unwrap();
        // sum_k (gamma * alpha)^k * r, truncated far beyond f64 resolution
        let series: f64 = (0..2000).map(|k| 0.45f64.powi(k)).sum();
        assert!((q - series).abs() < 1e-12);
        assert!((q - 1.0 / 0.55).abs() < 1e-12);
    }

    #[test]
    fn undiscounted_plain_expectation() {
        let mut b = MdpBuilder::new(1, 1.0);
        b.add_state();
        b.add_action(ActionId(0));
        b.add_transition(s(1), 0.5, 0.0);
        b.add_transition(s(2), 0.5, 0.0);
        for x in [1, 2] {
            b.add_state();
            b.add_action(ActionId(0));
            b.add_transition(s(x), 1.0, 0.0);
        }
        let m = b.build().unwrap();
        assert_eq!(q_update(&m, &[0.0, 2.0, 4.0], s(0), ActionId(0)).unwrap(), 3.0);
    }

    #[test]
    fn certain_undiscounted_loop_diverges() {
        let m = loop_exit(1.0, 1.0, 1.0);
        assert_eq!(
            q_update(&m, &[0.0, 0.0], s(0), ActionId(0)),
            Err(SolveError::DivergentSelfLoop { x: s(0), u: ActionId(0) })
        );
    }

    fn two_cycle(r: f64, gamma: f64) -> Mdp {
        let mut b = MdpBuilder::new(1, gamma);
        for next in [1u32, 0] {
            b.add_state();
            b.add_action(ActionId(0));
            b.add_transition(s(next), 1.0, r);
        }
        b.build().unwrap()
    }

    fn two_cycle_decomp() -> AbsorbingDecomposition {
        AbsorbingDecomposition { transient: vec![], absorbing: vec![s(0), s(1)], classes: vec![vec![s(0), s(1)]] }
    }

    #[test]
    fn rewarded_absorbing_cycle_is_solved_iteratively() {
        // v = 1 + 0.5 v on both states
        let sol =
            solve_absorbing_subspace(&two_cycle(1.0, 0.5), &two_cycle_decomp(), &SolverConfig::default()).unwrap();
        assert!(!sol.shortcut);
        assert!((sol.values.v[0] - 2.0).abs() < 1e-9);
        assert!((sol.values.v[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rewarded_absorbing_cycle_without_discount_is_rejected() {
        let err = solve_absorbing_subspace(&two_cycle(1.0, 1.0), &two_cycle_decomp(), &SolverConfig::default());
        assert_eq!(err.unwrap_err(), SolveError::NonContractive { x: s(0) });
    }

    #[test]
    fn empty_transient_set_is_the_absorbing_solution() {
        let m = two_cycle(0.0, 1.0);
        let r = rvi_solve(&m, &LevelSetSchedule::default(), &two_cycle_decomp()).unwrap();
        assert_eq!(r.stats.q_updates, 0);
        assert!(r.stats.absorbing_shortcut);
        assert_eq!(r.values.v, vec![0.0, 0.0]);
    }

    #[test]
    fn premature_level_is_a_schedule_mismatch() {
        // 0 -> 1 -> 2 (absorbing) but both transient states in one level
        let mut b = MdpBuilder::new(1, 1.0);
        for (next, r) in [(1u32, -1.0), (2, -1.0), (2, 0.0)] {
            b.add_state();
            b.add_action(ActionId(0));
            b.add_transition(s(next), 1.0, r);
        }
        let m = b.build().unwrap();
        let d =
            AbsorbingDecomposition { transient: vec![s(0), s(1)], absorbing: vec![s(2)], classes: vec![vec![s(2)]] };
        let bad = LevelSetSchedule { levels: vec![vec![s(0), s(1)]] };
        assert_eq!(rvi_solve(&m, &bad, &d).unwrap_err(), SolveError::ScheduleMismatch { x: s(0), xp: s(1) });
        let missing = LevelSetSchedule { levels: vec![vec![s(1)]] };
        assert_eq!(rvi_solve(&m, &missing, &d).unwrap_err(), SolveError::UnscheduledState { x: s(0) });
        let good = LevelSetSchedule { levels: vec![vec![s(1)], vec![s(0)]] };
        let r = rvi_solve(&m, &good, &d).unwrap();
        assert_eq!(r.values.v, vec![-2.0, -1.0, 0.0]);
        assert_eq!(r.stats.q_updates, 2);
    }
}
