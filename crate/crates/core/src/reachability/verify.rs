//! Reductivity of MDPs.
//!
//! An MDP is reductive when every policy induces a reductive chain. Instead of
//! enumerating policies, the union support chain is checked first: if it is
//! reductive and each of its classes stays a single closed class under every
//! policy, then every induced chain is reductive with the same decomposition
//! and the union potentials order the states for all policies at once.
//!
//! A failed union check is not yet a counterexample, so it is followed by a
//! search for a witness policy (the lowest-action policy and its single-action
//! deviations at the offending states) and, for small models, by exhaustive
//! enumeration.

use crate::mdp::{induced_chain, ActionId, Mdp, Policy, StateId};

use super::{
    drift_violations, level_set_schedule, verify_reductive, AbsorbingDecomposition, Analysis, LevelSetSchedule,
    ReachError, ReductivityVerdict, SupportGraph,
};

/// Largest policy count enumerated when the witness search is inconclusive.
const EXHAUSTIVE_POLICY_LIMIT: u128 = 1 << 12;

#[derive(Debug, Clone)]
pub struct MdpCertificate {
    pub verdict: ReductivityVerdict,
    /// The union support chain is reductive with policy-invariant classes, so
    /// `analysis` orders the states consistently for every policy.
    pub union_consistent: bool,
    pub graph: SupportGraph,
    pub analysis: Analysis,
}

pub fn certify_mdp(mdp: &Mdp) -> MdpCertificate {
    let graph = SupportGraph::union_of(mdp);
    let analysis = Analysis::of(&graph);
    let union_violations = drift_violations(&graph, &analysis.decomposition, &analysis.potentials);
    let unstable: Vec<StateId> = analysis
        .decomposition
        .classes
        .iter()
        .filter(|c| !class_is_policy_invariant(mdp, c))
        .flatten()
        .copied()
        .collect();

    if union_violations.is_empty() && unstable.is_empty() {
        return MdpCertificate {
            verdict: ReductivityVerdict { reductive: true, violations: Vec::new() },
            union_consistent: true,
            graph,
            analysis,
        };
    }

    let mut suspects: Vec<StateId> = union_violations.iter().map(|v| v.x).chain(unstable).collect();
    suspects.sort_unstable();
    suspects.dedup();
    let verdict =
        witness_search(mdp, &suspects).unwrap_or(ReductivityVerdict { reductive: false, violations: union_violations });
    MdpCertificate { verdict, union_consistent: false, graph, analysis }
}

pub fn verify_reductive_mdp(mdp: &Mdp) -> ReductivityVerdict {
    certify_mdp(mdp).verdict
}

/// Level sets and decomposition valid for every policy of `mdp`.
pub fn mdp_level_sets(mdp: &Mdp) -> Result<(LevelSetSchedule, AbsorbingDecomposition), ReachError> {
    let cert = certify_mdp(mdp);
    if !cert.verdict.reductive {
        return Err(ReachError::NotReductive { violations: cert.verdict.violations.len() });
    }
    if !cert.union_consistent {
        return Err(ReachError::InconsistentPreorder);
    }
    let schedule = level_set_schedule(&cert.analysis.potentials, &cert.analysis.decomposition);
    Ok((schedule, cert.analysis.decomposition))
}

/// A class of the union chain remains one closed class under every policy if
/// the edges shared by all actions already connect it strongly. Singletons
/// qualify trivially since union classes are closed.
fn class_is_policy_invariant(mdp: &Mdp, class: &[StateId]) -> bool {
    if class.len() == 1 {
        return true;
    }
    let local = |x: StateId| class.binary_search(&x).ok();
    let mut must: Vec<Vec<usize>> = Vec::with_capacity(class.len());
    for &x in class {
        let mut pairs = mdp.pairs(x);
        let first = pairs.next().expect("non-empty mask");
        let mut common: Vec<StateId> = mdp.row(first).iter().map(|e| e.next).collect();
        for k in pairs {
            let row = mdp.row(k);
            common.retain(|y| row.binary_search_by_key(y, |e| e.next).is_ok());
        }
        must.push(common.into_iter().filter_map(local).collect());
    }
    let mut rev = vec![Vec::new(); class.len()];
    for (i, succ) in must.iter().enumerate() {
        for &j in succ {
            rev[j].push(i);
        }
    }
    covers_all(&must) && covers_all(&rev)
}

fn covers_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Returns a verdict when it is conclusive: a non-reductive induced chain
/// (with its violations), or exhaustive confirmation that all policies are
/// reductive. `None` means the model was too large to settle.
fn witness_search(mdp: &Mdp, suspects: &[StateId]) -> Option<ReductivityVerdict> {
    let base = Policy::first_admissible(mdp);
    let check = |p: &Policy| {
        let chain = induced_chain(mdp, p).expect("policy built from masks");
        let v = verify_reductive(&chain);
        (!v.reductive).then_some(v)
    };
    if let Some(v) = check(&base) {
        return Some(v);
    }
    for &x in suspects {
        for &u in mdp.mask(x).iter().skip(1) {
            let mut p = base.clone();
            p.choice[x.index()] = u;
            if let Some(v) = check(&p) {
                return Some(v);
            }
        }
    }

    let total = mdp
        .states()
        .try_fold(1u128, |acc, x| acc.checked_mul(mdp.mask(x).len() as u128))
        .filter(|&t| t <= EXHAUSTIVE_POLICY_LIMIT)?;
    let mut digits = vec![0usize; mdp.state_count()];
    for _ in 0..total {
        let p = Policy { choice: mdp.states().map(|x| mdp.mask(x)[digits[x.index()]]).collect::<Vec<ActionId>>() };
        if let Some(v) = check(&p) {
            return Some(v);
        }
        for x in mdp.states() {
            let i = x.index();
            digits[i] += 1;
            if digits[i] < mdp.mask(x).len() {
                break;
            }
            digits[i] = 0;
        }
    }
    Some(ReductivityVerdict { reductive: true, violations: Vec::new() })
}
