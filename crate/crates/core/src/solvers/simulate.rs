use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::mdp::{induced_chain, sample_row, ActionId, MarkovChain, Mdp, ModelError, Policy, StateId};
use crate::reachability::absorbing_decomposition;

/// One rollout. `states` has one more element than `actions` and `rewards`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
    pub rewards: Vec<f64>,
    /// The rollout ended by entering the absorbing set of the induced chain.
    pub absorbed: bool,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Per-trial generator: one seed, one ChaCha stream per trial, so results do
/// not depend on the thread count.
pub(crate) fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Rolls out `policy` from `start` for at most `horizon` steps per trial,
/// stopping early once the absorbing set of the induced chain is entered.
pub fn simulate_policy(
    mdp: &Mdp,
    policy: &Policy,
    start: StateId,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, ModelError> {
    policy.validate(mdp)?;
    if start.index() >= mdp.state_count() {
        return Err(ModelError::IndexOutOfRange {
            what: "start state",
            index: start.index(),
            limit: mdp.state_count(),
        });
    }
    let chain = induced_chain(mdp, policy)?;
    let absorbing = absorbing_decomposition(&chain).absorbing_mask(mdp.state_count());

    Ok((0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut t = Trajectory { states: vec![start], actions: Vec::new(), rewards: Vec::new(), absorbed: false };
            let mut x = start;
            loop {
                if absorbing[x.index()] {
                    t.absorbed = true;
                    break;
                }
                if t.actions.len() == horizon {
                    break;
                }
                let u = policy.action(x);
                let row = mdp.row_for(x, u).expect("validated policy");
                let next = sample_row(row.iter().map(|e| (e.next, e.prob)), rng.random::<f64>());
                let reward = row.iter().find(|e| e.next == next).map_or(0.0, |e| e.reward);
                t.actions.push(u);
                t.rewards.push(reward);
                t.states.push(next);
                x = next;
            }
            t
        })
        .collect())
}

/// Steps needed to enter the absorbing set from `start`, per trial, or
/// `None` when `budget` steps were not enough.
pub fn chain_absorption_times(
    chain: &MarkovChain,
    start: StateId,
    budget: usize,
    trials: usize,
    seed: u64,
) -> Vec<Option<usize>> {
    let absorbing = absorbing_decomposition(chain).absorbing_mask(chain.state_count());
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut x = start;
            for step in 0..=budget {
                if absorbing[x.index()] {
                    return Some(step);
                }
                x = chain.sample_next(x, rng.random::<f64>());
            }
            None
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;

    fn s(i: u32) -> StateId {
        StateId(i)
    }

    fn coin() -> Mdp {
        let mut b = MdpBuilder::new(1, 1.0);
        b.add_state();
        b.add_action(ActionId(0));
        b.add_transition(s(0), 0.5, 1.0);
        b.add_transition(s(1), 0.5, 2.0);
        b.add_state();
        b.add_action(ActionId(0));
        b.add_transition(s(1), 1.0, 0.0);
        b.build().unwrap()
    }

    #[test]
    fn rollouts_are_reproducible_and_absorb() {
        let m = coin();
        let p = Policy::first_admissible(&m);
        let a = simulate_policy(&m, &p, s(0), 1000, 64, 7).unwrap();
        let b = simulate_policy(&m, &p, s(0), 1000, 64, 7).unwrap();
        assert_eq!(a, b);
        for t in &a {
            assert!(t.absorbed);
            assert_eq!(*t.states.last().unwrap(), s(1));
            assert_eq!(*t.rewards.last().unwrap(), 2.0);
            assert_eq!(t.states.len(), t.actions.len() + 1);
        }
    }

    #[test]
    fn horizon_truncates() {
        let m = coin();
        let p = Policy::first_admissible(&m);
        let ts = simulate_policy(&m, &p, s(0), 0, 4, 1).unwrap();
        assert!(ts.iter().all(|t| t.states == vec![s(0)] && !t.absorbed));
    }

    #[test]
    fn absorption_times_are_geometric() {
        let chain = MarkovChain::from_rows(vec![vec![(s(0), 0.5), (s(1), 0.5)], vec![(s(1), 1.0)]]).unwrap();
        let times = chain_absorption_times(&chain, s(0), 10_000, 20_000, 3);
        let mean = times.iter().map(|t| t.unwrap() as f64).sum::<f64>() / times.len() as f64;
        assert!((mean - 2.0).abs() < 0.05, "mean {mean}");
    }
}
