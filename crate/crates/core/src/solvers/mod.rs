//! Value-iteration solvers.
//!
//! * [`rvi_solve`]: reductive value iteration, one closed-form evaluation per
//!   transient `(state, action)` pair, visiting potential level sets upward.
//! * [`qvi_solve`]: Gauss-Seidel value iteration with a configurable sweep
//!   order (natural, random level order per sweep, or reversed level order).
//! * [`bvi_solve`]: backward value iteration driven by a FIFO work queue
//!   seeded with the predecessors of the absorbing set.
//!
//! All solvers maximise, break argmax ties towards the lowest action id and
//! report update counts alongside wall time.

mod bvi;
mod qvi;
mod rvi;
mod simulate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{ActionId, Mdp, Policy, StateId, ValueTable};
use crate::reachability::ReachError;

pub use bvi::bvi_solve;
pub use qvi::{qvi_solve, qvi_solve_from};
pub use rvi::{q_update, rvi_solve, rvi_solve_with, solve_absorbing_subspace, AbsorbingSolution};
pub(crate) use simulate::trial_rng;
pub use simulate::{chain_absorption_times, simulate_policy, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("model is not reductive")]
    NotReductive,
    #[error("state {x} was scheduled before its successor {xp} was solved")]
    ScheduleMismatch { x: StateId, xp: StateId },
    #[error("transient state {x} is missing from the level-set schedule")]
    UnscheduledState { x: StateId },
    #[error("self-loop of ({x}, {u}) is certain under an undiscounted objective")]
    DivergentSelfLoop { x: StateId, u: ActionId },
    #[error("absorbing class containing {x} carries rewards but the discount is 1")]
    NonContractive { x: StateId },
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    MaxSweepsExceeded { sweeps: u64, residual: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

impl From<ReachError> for SolveError {
    fn from(_: ReachError) -> Self {
        SolveError::NotReductive
    }
}

/// Sweep order for Gauss-Seidel value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepOrdering {
    /// Level sets (and the absorbing block) in a fresh random order each sweep.
    RandomPerSweep,
    /// Level sets by descending potential, absorbing states last.
    ReversedLevelSets,
    /// Ascending state id.
    Natural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_sweeps: u64,
    pub ordering: SweepOrdering,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { epsilon: 1e-10, max_sweeps: 100_000, ordering: SweepOrdering::Natural, seed: 0 }
    }
}

impl SolverConfig {
    pub fn with_ordering(ordering: SweepOrdering) -> Self {
        SolverConfig { ordering, ..SolverConfig::default() }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-2) {
            return Err(SolveError::InvalidConfig(format!("epsilon {} outside (0, 1e-2]", self.epsilon)));
        }
        if self.max_sweeps == 0 {
            return Err(SolveError::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    /// Number of `q(x, u)` evaluations.
    pub q_updates: u64,
    pub sweeps: u64,
    pub wall_nanos: u64,
    pub converged: bool,
    pub residual: f64,
    /// Successor entries read while evaluating `q`.
    #[serde(skip)]
    pub successor_reads: u64,
    /// The absorbing set was solved by the zero-reward shortcut.
    #[serde(skip)]
    pub absorbing_shortcut: bool,
    /// `q` evaluations spent inside the absorbing set.
    #[serde(skip)]
    pub absorbing_updates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub values: ValueTable,
    pub policy: Policy,
    pub stats: SolveStats,
}

/// JSON export layout of a [`SolveResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveExport {
    pub v: Vec<f64>,
    pub policy: Vec<u32>,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn export(&self) -> SolveExport {
        SolveExport {
            v: self.values.v.clone(),
            policy: self.policy.choice.iter().map(|u| u.0).collect(),
            stats: self.stats.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.export()).expect("solve result serialization is infallible")
    }
}

/// One Gauss-Seidel backup of `x` against the current values: fills the `q`
/// entries of `x` and returns the best value and its action.
#[inline]
pub(crate) fn backup(mdp: &Mdp, v: &[f64], q: &mut [f64], x: StateId) -> (f64, ActionId) {
    let gamma = mdp.discount();
    let mut best = f64::NEG_INFINITY;
    let mut best_u = ActionId(0);
    for k in mdp.pairs(x) {
        let mut acc = 0.0;
        for e in mdp.row(k) {
            acc += e.prob * (e.reward + gamma * v[e.next.index()]);
        }
        q[k] = acc;
        if acc > best {
            best = acc;
            best_u = mdp.pair_action(k);
        }
    }
    (best, best_u)
}

/// Max-norm Bellman residual `|T v - v|` of one synchronous backup.
pub fn bellman_residual(mdp: &Mdp, v: &[f64]) -> f64 {
    let mut q = vec![0.0; mdp.pair_count()];
    mdp.states().map(|x| (backup(mdp, v, &mut q, x).0 - v[x.index()]).abs()).fold(0.0, f64::max)
}

/// Greedy consistency: `v(x) = max_u q(x, u)` and the policy attains it with
/// the lowest action id among maximisers.
pub fn is_greedy_consistent(mdp: &Mdp, result: &SolveResult) -> bool {
    mdp.states().all(|x| {
        let pairs = mdp.pairs(x);
        let qs = &result.values.q[pairs.clone()];
        let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = qs.iter().position(|&q| q == best).map(|i| mdp.pair_action(pairs.start + i));
        result.values.v[x.index()] == best && first == Some(result.policy.action(x))
    })
}

pub(crate) fn elapsed_nanos(start: std::time::Instant) -> u64 {
    (start.elapsed().as_nanos() as u64).max(1)
}
