//! Reductive Markov decision processes: reachability analysis, potential
//! orderings and value iteration that solves each transient state once.

pub mod domains;
pub mod mdp;
pub mod reachability;
pub mod solvers;

pub use mdp::{ActionId, MarkovChain, Mdp, MdpBuilder, Policy, StateId, ValueTable};
