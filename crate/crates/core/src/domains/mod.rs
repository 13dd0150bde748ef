//! Benchmark problems and fixtures.

mod fig2;
mod liquidation;
mod shrink;
mod spiral;

use thiserror::Error;

use crate::mdp::{Mdp, ModelError};
use crate::reachability::{AbsorbingDecomposition, LevelSetSchedule};

pub use fig2::{build_fig2, Fig2Variant};
pub use liquidation::{build_liquidation, LiquidationParams, LiquidationState};
pub use shrink::{shrink_expected_drift, shrink_simulate, shrink_step, ShrinkMode, ShrinkParams, ShrinkSummary};
pub use spiral::{build_spiral, spiral_chain, spiral_coords, spiral_id, DEFAULT_MIX_LEVELS, SPIRAL_SIDE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("argument outside the domain: {0}")]
    OutOfDomain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A built MDP with a level-set schedule and decomposition valid for every
/// policy.
#[derive(Debug, Clone)]
pub struct DomainModel {
    pub mdp: Mdp,
    pub schedule: LevelSetSchedule,
    pub decomposition: AbsorbingDecomposition,
}
