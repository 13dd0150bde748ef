//! Spiral walk on a 5x5 lattice towards the centre cell.
//!
//! Cells are addressed as `(x, y)` with `x` the column and `y` the row,
//! `id = 5 y + x`. Three cells branch into two neighbours; an action `k`
//! sends probability `mix_levels[k]` to the lower-potential neighbour.

use crate::mdp::{ActionId, MarkovChain, MdpBuilder, StateId};
use crate::reachability::{counting_potential, level_set_schedule, Analysis, SupportGraph};

use super::{DomainError, DomainModel};

pub const SPIRAL_SIDE: usize = 5;
pub const DEFAULT_MIX_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

const CENTRE: (usize, usize) = (2, 2);

type Cell = (usize, usize);

/// Lattice edges `(from, to)`; the centre only loops on itself.
const EDGES: &[(Cell, &[Cell])] = &[
    ((0, 0), &[(1, 0)]),
    ((1, 0), &[(2, 0)]),
    ((2, 0), &[(3, 0), (2, 1)]),
    ((3, 0), &[(4, 0)]),
    ((4, 0), &[(4, 1)]),
    ((0, 1), &[(1, 1)]),
    ((1, 1), &[(2, 1)]),
    ((2, 1), &[(3, 1), (2, 2)]),
    ((3, 1), &[(3, 2)]),
    ((4, 1), &[(4, 2)]),
    ((0, 2), &[(0, 1)]),
    ((1, 2), &[(2, 2)]),
    ((2, 2), &[(2, 2)]),
    ((3, 2), &[(3, 3)]),
    ((4, 2), &[(4, 3)]),
    ((0, 3), &[(0, 2)]),
    ((1, 3), &[(1, 2)]),
    ((2, 3), &[(1, 3), (2, 2)]),
    ((3, 3), &[(2, 3)]),
    ((4, 3), &[(4, 4)]),
    ((0, 4), &[(0, 3)]),
    ((1, 4), &[(0, 4)]),
    ((2, 4), &[(1, 4)]),
    ((3, 4), &[(2, 4)]),
    ((4, 4), &[(3, 4)]),
];

pub fn spiral_id(x: usize, y: usize) -> StateId {
    debug_assert!(x < SPIRAL_SIDE && y < SPIRAL_SIDE);
    StateId::new(y * SPIRAL_SIDE + x)
}

pub fn spiral_coords(s: StateId) -> (usize, usize) {
    (s.index() % SPIRAL_SIDE, s.index() / SPIRAL_SIDE)
}

fn neighbours(x: StateId) -> Vec<StateId> {
    let (cx, cy) = spiral_coords(x);
    let (_, to) = EDGES.iter().find(|(from, _)| *from == (cx, cy)).expect("every cell has edges");
    to.iter().map(|&(a, b)| spiral_id(a, b)).collect()
}

/// The spiral as a Markov chain, splitting evenly at branching cells.
pub fn spiral_chain() -> MarkovChain {
    let rows = (0..SPIRAL_SIDE * SPIRAL_SIDE)
        .map(|i| {
            let succ = neighbours(StateId::new(i));
            let p = 1.0 / succ.len() as f64;
            succ.into_iter().map(|s| (s, p)).collect()
        })
        .collect();
    MarkovChain::from_rows(rows).expect("spiral rows are stochastic")
}

/// Spiral MDP with reward `step_reward` on every move outside the centre.
/// Branching cells admit one action per mix level; all others admit only
/// action 0.
pub fn build_spiral(step_reward: f64, mix_levels: &[f64]) -> Result<DomainModel, DomainError> {
    if mix_levels.is_empty() {
        return Err(DomainError::InvalidParams("mix_levels must not be empty".into()));
    }
    if let Some(m) = mix_levels.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(DomainError::InvalidParams(format!("mix level {m} outside [0, 1]")));
    }
    if !step_reward.is_finite() {
        return Err(DomainError::InvalidParams("step_reward must be finite".into()));
    }

    let phi = counting_potential(&spiral_chain());
    let centre = spiral_id(CENTRE.0, CENTRE.1);
    let mut b = MdpBuilder::new(mix_levels.len(), 1.0);
    for i in 0..SPIRAL_SIDE * SPIRAL_SIDE {
        let x = StateId::new(i);
        b.add_state();
        let reward = if x == centre { 0.0 } else { step_reward };
        let succ = neighbours(x);
        if let [only] = succ[..] {
            b.add_action(ActionId(0));
            b.add_transition(only, 1.0, reward);
            continue;
        }
        let (low, high) = if phi.get(succ[0]) < phi.get(succ[1]) { (succ[0], succ[1]) } else { (succ[1], succ[0]) };
        for (k, &m) in mix_levels.iter().enumerate() {
            b.add_action(ActionId::new(k));
            if m > 0.0 {
                b.add_transition(low, m, reward);
            }
            if m < 1.0 {
                b.add_transition(high, 1.0 - m, reward);
            }
        }
    }
    let mdp = b.build()?;
    let analysis = Analysis::of(&SupportGraph::union_of(&mdp));
    let schedule = level_set_schedule(&analysis.potentials, &analysis.decomposition);
    Ok(DomainModel { mdp, schedule, decomposition: analysis.decomposition })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_round_trip() {
        for i in 0..25 {
            let (x, y) = spiral_coords(StateId::new(i));
            assert_eq!(spiral_id(x, y), StateId::new(i));
        }
    }

    #[test]
    fn first_branch_is_an_even_split_in_the_chain() {
        let c = spiral_chain();
        assert_eq!(c.successors(spiral_id(2, 0)), &[(spiral_id(3, 0), 0.5), (spiral_id(2, 1), 0.5)]);
    }

    #[test]
    fn extreme_actions_pick_one_neighbour() {
        let d = build_spiral(-1.0, &[0.0, 1.0]).unwrap();
        let x = spiral_id(2, 0);
        let east = d.mdp.row_for(x, ActionId(0)).unwrap();
        let south = d.mdp.row_for(x, ActionId(1)).unwrap();
        assert_eq!((east.len(), east[0].next), (1, spiral_id(3, 0)));
        assert_eq!((south.len(), south[0].next), (1, spiral_id(2, 1)));
    }

    #[test]
    fn empty_or_bad_mix_levels_are_rejected() {
        assert!(build_spiral(-1.0, &[]).is_err());
        assert!(build_spiral(-1.0, &[1.5]).is_err());
    }
}
