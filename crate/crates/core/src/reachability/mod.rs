//! Forward reachability under the counting measure.
//!
//! Everything here is derived from one strongly-connected-component pass
//! over the support graph of a chain (or the union support of an MDP):
//!
//! * closed components are the absorbing, indecomposable classes and their
//!   union is the absorbing set; the remaining states are transient,
//! * the potential `phi(x)` is the number of states reachable from `x`,
//!   `x` itself included,
//! * a chain is reductive when every transient transition other than a
//!   self-loop strictly lowers the potential. Equivalently, the transient
//!   states form a DAG once self-loops are removed, which is what makes the
//!   upper-triangular canonical ordering possible.

mod graph;
mod verify;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{MarkovChain, StateId};

pub(crate) use graph::Condensation;
pub use graph::SupportGraph;
pub use verify::{certify_mdp, mdp_level_sets, verify_reductive_mdp, MdpCertificate};

/// Partition of the states into the transient part and the a.i. classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsorbingDecomposition {
    /// Transient states, ascending.
    pub transient: Vec<StateId>,
    /// Union of the classes, ascending.
    pub absorbing: Vec<StateId>,
    /// Closed strongly-connected classes, each ascending, ordered by their
    /// smallest state.
    pub classes: Vec<Vec<StateId>>,
}

impl AbsorbingDecomposition {
    /// Per-state membership flags for the absorbing set.
    pub fn absorbing_mask(&self, state_count: usize) -> Vec<bool> {
        let mut mask = vec![false; state_count];
        for x in &self.absorbing {
            mask[x.index()] = true;
        }
        mask
    }
}

/// Counting-measure potentials and the self-loop set `L(X)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub phi: Vec<usize>,
    /// States with `0 < p(x, {x}) < 1`, ascending.
    pub self_loops: Vec<StateId>,
}

impl PotentialTable {
    pub fn get(&self, x: StateId) -> usize {
        self.phi[x.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    NoAbsorbingSet,
    NonDecreasingTransient,
    CertainSelfLoopMarkedTransient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub x: StateId,
    pub xp: StateId,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductivityVerdict {
    pub reductive: bool,
    pub violations: Vec<Violation>,
}

impl ReductivityVerdict {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ReductivityVerdict { reductive: violations.is_empty(), violations }
    }
}

/// State ordering under which the transition matrix is block upper-triangular
/// with an upper-triangular transient block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalPermutation {
    pub order: Vec<StateId>,
    /// Number of leading transient states in `order`.
    pub transient_len: usize,
}

/// Transient states grouped by potential, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelSetSchedule {
    pub levels: Vec<Vec<StateId>>,
}

impl LevelSetSchedule {
    pub fn state_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn iter_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.levels.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("chain is not reductive ({violations} violation(s))")]
    NotReductive { violations: usize },
    #[error("the union support of the MDP admits no policy-independent potential ordering")]
    InconsistentPreorder,
}

/// Decomposition and potentials of one support graph.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub decomposition: AbsorbingDecomposition,
    pub potentials: PotentialTable,
}

impl Analysis {
    pub fn of(g: &SupportGraph) -> Self {
        let cond = Condensation::new(g);
        let decomposition = decomposition_from(&cond, g.state_count());
        let counts = cond.reach_counts();
        let phi = cond.comp_of.iter().map(|&c| counts[c as usize]).collect();
        let self_loops = (0..g.state_count())
            .map(StateId::new)
            .filter(|&x| {
                let p = g.self_loop_prob(x);
                p > 0.0 && p < 1.0
            })
            .collect();
        Analysis { decomposition, potentials: PotentialTable { phi, self_loops } }
    }
}

fn decomposition_from(cond: &Condensation, n: usize) -> AbsorbingDecomposition {
    let mut classes: Vec<Vec<StateId>> =
        (0..cond.len()).filter(|&c| cond.is_closed(c)).map(|c| cond.members(c).to_vec()).collect();
    classes.sort_by_key(|c| c[0]);
    let mut is_abs = vec![false; n];
    for x in classes.iter().flatten() {
        is_abs[x.index()] = true;
    }
    let (absorbing, transient) = (0..n).map(StateId::new).partition(|x| is_abs[x.index()]);
    AbsorbingDecomposition { transient, absorbing, classes }
}

/// Smallest successor-closed set containing `x`, ascending.
pub fn reachable_set_in(g: &SupportGraph, x: StateId) -> Vec<StateId> {
    let mut seen = vec![false; g.state_count()];
    let mut stack = vec![x];
    seen[x.index()] = true;
    let mut out = Vec::new();
    while let Some(y) = stack.pop() {
        out.push(y);
        for &z in g.successors(y) {
            if !seen[z.index()] {
                seen[z.index()] = true;
                stack.push(z);
            }
        }
    }
    out.sort_unstable();
    out
}

/// States outside `target` that reach it within `n >= 1` steps.
pub fn predecessors_in(g: &SupportGraph, target: &[StateId], n: usize) -> Vec<StateId> {
    let rev = g.reversed();
    let mut depth = vec![usize::MAX; g.state_count()];
    let mut queue = VecDeque::new();
    for &t in target {
        if depth[t.index()] != 0 {
            depth[t.index()] = 0;
            queue.push_back(t);
        }
    }
    let mut out = Vec::new();
    while let Some(y) = queue.pop_front() {
        let d = depth[y.index()];
        if d == n {
            continue;
        }
        for &p in rev.successors(y) {
            if depth[p.index()] == usize::MAX {
                depth[p.index()] = d + 1;
                out.push(p);
                queue.push_back(p);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Drift-condition violations of `g` given its decomposition and potentials.
///
/// Transitions leaving absorbing states are exempt: potentials are uniform
/// on each class, so their difference is zero.
pub fn drift_violations(g: &SupportGraph, decomp: &AbsorbingDecomposition, pt: &PotentialTable) -> Vec<Violation> {
    let mut out = Vec::new();
    if g.state_count() > 0 && decomp.absorbing.is_empty() {
        out.push(Violation { x: StateId(0), xp: StateId(0), kind: ViolationKind::NoAbsorbingSet });
    }
    for class in &decomp.classes {
        debug_assert!(class.iter().all(|&x| pt.get(x) == pt.get(class[0])));
    }
    for &x in &decomp.transient {
        for &xp in g.successors(x) {
            if xp == x {
                if g.self_loop_prob(x) >= 1.0 {
                    out.push(Violation { x, xp, kind: ViolationKind::CertainSelfLoopMarkedTransient });
                }
            } else if pt.get(xp) >= pt.get(x) {
                out.push(Violation { x, xp, kind: ViolationKind::NonDecreasingTransient });
            }
        }
    }
    out
}

/// Verdict plus the analysis it was computed from.
pub fn verify_graph(g: &SupportGraph) -> (ReductivityVerdict, Analysis) {
    let analysis = Analysis::of(g);
    let violations = drift_violations(g, &analysis.decomposition, &analysis.potentials);
    (ReductivityVerdict::from_violations(violations), analysis)
}

/// Transient states by descending potential (ties by ascending id), then the
/// classes in order of their smallest state. Fails unless the resulting
/// ordering passes [`is_canonical`].
pub fn canonical_order(
    g: &SupportGraph,
    decomp: &AbsorbingDecomposition,
    pt: &PotentialTable,
) -> Result<CanonicalPermutation, ReachError> {
    let violations = drift_violations(g, decomp, pt);
    if !violations.is_empty() {
        return Err(ReachError::NotReductive { violations: violations.len() });
    }
    let mut order = decomp.transient.clone();
    order.sort_by(|a, b| pt.get(*b).cmp(&pt.get(*a)).then(a.cmp(b)));
    let transient_len = order.len();
    order.extend(decomp.classes.iter().flatten().copied());
    let perm = CanonicalPermutation { order, transient_len };
    if !is_canonical(g, &perm) {
        return Err(ReachError::NotReductive { violations: 0 });
    }
    Ok(perm)
}

/// Checks every stored entry of the permuted matrix: transient rows may only
/// point at or after their own position, absorbing rows only into their own
/// block of the absorbing part.
pub fn is_canonical(g: &SupportGraph, perm: &CanonicalPermutation) -> bool {
    let n = g.state_count();
    if perm.order.len() != n {
        return false;
    }
    let mut pos = vec![usize::MAX; n];
    for (i, x) in perm.order.iter().enumerate() {
        if pos[x.index()] != usize::MAX {
            return false;
        }
        pos[x.index()] = i;
    }
    // diagonal blocks of the absorbing part: closed components
    let cond = Condensation::new(g);
    perm.order.iter().enumerate().all(|(i, &x)| {
        g.successors(x).iter().all(|&y| {
            let j = pos[y.index()];
            if i < perm.transient_len {
                j >= i
            } else {
                j >= perm.transient_len && cond.comp_of[x.index()] == cond.comp_of[y.index()]
            }
        })
    })
}

/// Transient states bucketed by potential, ascending; each bucket ascending
/// by id. Repeatedly taking the minimum-potential unsolved states yields the
/// same sequence.
pub fn level_set_schedule(pt: &PotentialTable, decomp: &AbsorbingDecomposition) -> LevelSetSchedule {
    let mut states = decomp.transient.clone();
    states.sort_by_key(|&x| (pt.get(x), x));
    let mut levels: Vec<Vec<StateId>> = Vec::new();
    let mut last = None;
    for x in states {
        let phi = pt.get(x);
        if last != Some(phi) {
            levels.push(Vec::new());
            last = Some(phi);
        }
        levels.last_mut().unwrap().push(x);
    }
    LevelSetSchedule { levels }
}

// ---- chain-level operations ------------------------------------------------

/// `R(x)`: every state reachable from `x`, including `x`.
pub fn reachable_set(chain: &MarkovChain, x: StateId) -> Vec<StateId> {
    reachable_set_in(&SupportGraph::from_chain(chain), x)
}

/// `phi(x) = |R(x)|` for every state, computed on the condensation.
pub fn counting_potential(chain: &MarkovChain) -> PotentialTable {
    Analysis::of(&SupportGraph::from_chain(chain)).potentials
}

/// `psi(x -> x') = phi(x') - phi(x)`.
pub fn potential_difference(pt: &PotentialTable, x: StateId, xp: StateId) -> i64 {
    pt.get(xp) as i64 - pt.get(x) as i64
}

pub fn absorbing_decomposition(chain: &MarkovChain) -> AbsorbingDecomposition {
    let g = SupportGraph::from_chain(chain);
    decomposition_from(&Condensation::new(&g), g.state_count())
}

/// `L(A)`: states with `0 < p(x, {x}) < 1`, restricted to `subset` if given.
pub fn self_loop_states(chain: &MarkovChain, subset: Option<&[StateId]>) -> Vec<StateId> {
    let is_loop = |x: StateId| {
        let p = chain.self_loop_prob(x);
        p > 0.0 && p < 1.0
    };
    let mut out: Vec<StateId> = match subset {
        Some(s) => s.iter().copied().filter(|&x| is_loop(x)).collect(),
        None => chain.states().filter(|&x| is_loop(x)).collect(),
    };
    out.sort_unstable();
    out.dedup();
    out
}

pub fn verify_reductive(chain: &MarkovChain) -> ReductivityVerdict {
    verify_graph(&SupportGraph::from_chain(chain)).0
}

pub fn canonical_permutation(
    chain: &MarkovChain,
    decomp: &AbsorbingDecomposition,
    pt: &PotentialTable,
) -> Result<CanonicalPermutation, ReachError> {
    canonical_order(&SupportGraph::from_chain(chain), decomp, pt)
}

/// `G_n(A)`: states outside `target` with positive probability of entering it
/// within `n` steps.
pub fn predecessors(chain: &MarkovChain, target: &[StateId], n: usize) -> Vec<StateId> {
    predecessors_in(&SupportGraph::from_chain(chain), target, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(i: u32) -> StateId {
        StateId(i)
    }

    fn chain(rows: &[&[(u32, f64)]]) -> MarkovChain {
        MarkovChain::from_rows(rows.iter().map(|r| r.iter().map(|&(x, p)| (s(x), p)).collect()).collect()).unwrap()
    }

    /// a=0 -> b=1, b -> {a, c=2}, c absorbing
    fn transient_two_cycle() -> MarkovChain {
        chain(&[&[(1, 1.0)], &[(0, 0.5), (2, 0.5)], &[(2, 1.0)]])
    }

    #[test]
    fn transient_cycle_is_rejected_on_both_edges() {
        let c = transient_two_cycle();
        let pt = counting_potential(&c);
        assert_eq!(pt.phi, vec![3, 3, 1]);
        let v = verify_reductive(&c);
        assert!(!v.reductive);
        assert!(v.violations.contains(&Violation { x: s(0), xp: s(1), kind: ViolationKind::NonDecreasingTransient }));
        assert!(v.violations.contains(&Violation { x: s(1), xp: s(0), kind: ViolationKind::NonDecreasingTransient }));
        let d = absorbing_decomposition(&c);
        assert_eq!(canonical_permutation(&c, &d, &pt), Err(ReachError::NotReductive { violations: 2 }));
    }

    #[test]
    fn single_closed_cycle_is_vacuously_reductive() {
        let c = chain(&[&[(1, 1.0)], &[(0, 1.0)]]);
        let d = absorbing_decomposition(&c);
        assert!(d.transient.is_empty());
        assert_eq!(d.classes, vec![vec![s(0), s(1)]]);
        assert!(verify_reductive(&c).reductive);
    }

    #[test]
    fn absorbing_singleton() {
        let c = chain(&[&[(0, 1.0)]]);
        assert_eq!(reachable_set(&c, s(0)), vec![s(0)]);
        assert_eq!(counting_potential(&c).phi, vec![1]);
        assert!(self_loop_states(&c, None).is_empty());
        let v = verify_reductive(&c);
        assert!(v.reductive);
    }

    #[test]
    fn psi_of_identity_is_zero() {
        let pt = counting_potential(&transient_two_cycle());
        for x in 0..3 {
            assert_eq!(potential_difference(&pt, s(x), s(x)), 0);
        }
    }

    #[test]
    fn birth_death_to_zero_keeps_descending_order() {
        // 3 -> {3, 2}, 2 -> {2, 1}, 1 -> {1, 0}, 0 absorbing
        let c = chain(&[&[(0, 1.0)], &[(0, 0.5), (1, 0.5)], &[(1, 0.5), (2, 0.5)], &[(2, 0.5), (3, 0.5)]]);
        let pt = counting_potential(&c);
        let d = absorbing_decomposition(&c);
        let p = canonical_permutation(&c, &d, &pt).unwrap();
        assert_eq!(p.order, vec![s(3), s(2), s(1), s(0)]);
        assert_eq!(self_loop_states(&c, Some(&d.transient)), vec![s(1), s(2), s(3)]);
        let sched = level_set_schedule(&pt, &d);
        assert_eq!(sched.levels, vec![vec![s(1)], vec![s(2)], vec![s(3)]]);
    }

    #[test]
    fn predecessors_exclude_the_target() {
        let c = transient_two_cycle();
        assert_eq!(predecessors(&c, &[s(2)], 1), vec![s(1)]);
        assert_eq!(predecessors(&c, &[s(2)], 2), vec![s(0), s(1)]);
        assert!(predecessors(&c, &[s(0), s(1), s(2)], 3).is_empty());
    }

    #[test]
    fn empty_transient_set_gives_empty_schedule() {
        let c = chain(&[&[(1, 1.0)], &[(0, 1.0)]]);
        let pt = counting_potential(&c);
        assert!(level_set_schedule(&pt, &absorbing_decomposition(&c)).levels.is_empty());
    }

    #[test]
    fn is_canonical_rejects_bad_orders() {
        let c = chain(&[&[(1, 1.0)], &[(2, 1.0)], &[(2, 1.0)]]);
        let g = SupportGraph::from_chain(&c);
        assert!(is_canonical(&g, &CanonicalPermutation { order: vec![s(0), s(1), s(2)], transient_len: 2 }));
        assert!(!is_canonical(&g, &CanonicalPermutation { order: vec![s(1), s(0), s(2)], transient_len: 2 }));
        // absorbing state placed inside the transient block is fine for
        // triangularity but not for the block structure
        assert!(!is_canonical(&g, &CanonicalPermutation { order: vec![s(0), s(1), s(2)], transient_len: 1 }));
    }
}
