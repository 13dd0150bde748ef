use serde::{Deserialize, Serialize};

use crate::mdp::{MarkovChain, StateId};

use super::DomainError;

/// The two small reductive chains.
///
/// * `A`: `0 -> {0, 1, 2, 3}`, `1 -> 3`, `2 -> 3`, with `3` absorbing.
/// * `B`: `0 -> {1, 2}`, `1 -> 3`, `2 -> 4`, and the closed pair `3 <-> 4`
///   where both states also loop on themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fig2Variant {
    A,
    B,
}

/// `loop_prob` is the self-loop mass of state 0 in `A` and of states 3, 4 in
/// `B`; remaining mass is split evenly.
pub fn build_fig2(variant: Fig2Variant, loop_prob: f64) -> Result<MarkovChain, DomainError> {
    if !(loop_prob > 0.0 && loop_prob < 1.0) {
        return Err(DomainError::InvalidParams(format!("loop_prob {loop_prob} outside (0, 1)")));
    }
    let s = StateId;
    let rest = 1.0 - loop_prob;
    let rows = match variant {
        Fig2Variant::A => vec![
            vec![(s(0), loop_prob), (s(1), rest / 3.0), (s(2), rest / 3.0), (s(3), rest / 3.0)],
            vec![(s(3), 1.0)],
            vec![(s(3), 1.0)],
            vec![(s(3), 1.0)],
        ],
        Fig2Variant::B => vec![
            vec![(s(1), 0.5), (s(2), 0.5)],
            vec![(s(3), 1.0)],
            vec![(s(4), 1.0)],
            vec![(s(3), loop_prob), (s(4), rest)],
            vec![(s(3), rest), (s(4), loop_prob)],
        ],
    };
    Ok(MarkovChain::from_rows(rows)?)
}
