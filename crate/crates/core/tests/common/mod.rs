//! Independent oracles shared by the integration tests: dense boolean
//! closures, full matrix scans and brute-force policy evaluation.
#![allow(dead_code)]

use reductive::mdp::{MarkovChain, Mdp, Policy, StateId};

/// Spiral node labels (reachable-set sizes), indexed `[y][x]`.
pub const SPIRAL_ANNOTATIONS: [[usize; 5]; 5] =
    [[25, 24, 23, 22, 21], [10, 9, 8, 7, 20], [11, 2, 1, 6, 19], [12, 3, 4, 5, 18], [13, 14, 15, 16, 17]];

pub fn chain_adj(chain: &MarkovChain) -> Vec<Vec<usize>> {
    chain.states().map(|x| chain.successors(x).iter().map(|e| e.0.index()).collect()).collect()
}

pub fn union_adj(mdp: &Mdp) -> Vec<Vec<usize>> {
    mdp.states()
        .map(|x| {
            let mut s: Vec<usize> = mdp.pairs(x).flat_map(|k| mdp.row(k).iter().map(|e| e.next.index())).collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect()
}

/// Reflexive-transitive closure by Warshall's algorithm.
pub fn closure(adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = vec![vec![false; n]; n];
    for (x, succ) in adj.iter().enumerate() {
        r[x][x] = true;
        for &y in succ {
            r[x][y] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// `x` is absorbing when everything it reaches reaches it back.
pub fn absorbing_by_closure(r: &[Vec<bool>]) -> Vec<bool> {
    (0..r.len()).map(|x| (0..r.len()).all(|y| !r[x][y] || r[y][x])).collect()
}

/// Dense scan of the permuted matrix: no entry strictly below the diagonal
/// inside the transient block, and no mass from absorbing rows into
/// transient columns.
pub fn dense_canonical_scan(adj: &[Vec<usize>], order: &[StateId], transient_len: usize) -> bool {
    let n = adj.len();
    if order.len() != n {
        return false;
    }
    let mut m = vec![vec![false; n]; n];
    let mut pos = vec![0; n];
    for (i, x) in order.iter().enumerate() {
        pos[x.index()] = i;
    }
    for (x, succ) in adj.iter().enumerate() {
        for &y in succ {
            m[pos[x]][pos[y]] = true;
        }
    }
    for i in 0..n {
        for j in 0..transient_len {
            let below = i < transient_len && j < i;
            let absorbing_row = i >= transient_len;
            if (below || absorbing_row) && m[i][j] {
                return false;
            }
        }
    }
    true
}

/// Expected total reward of a deterministic policy by `iters` synchronous
/// Jacobi sweeps from zero; exact after `iters` >= the longest transient
/// path when the induced chain is acyclic apart from zero-reward sinks.
pub fn evaluate_policy(mdp: &Mdp, policy: &Policy, iters: usize) -> Vec<f64> {
    let mut v = vec![0.0; mdp.state_count()];
    for _ in 0..iters {
        v = mdp
            .states()
            .map(|x| {
                let row = mdp.row_for(x, policy.action(x)).unwrap();
                row.iter().map(|e| e.prob * (e.reward + mdp.discount() * v[e.next.index()])).sum()
            })
            .collect();
    }
    v
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `sum |mask(x)|` over the transient states.
pub fn transient_mask_total(mdp: &Mdp, transient: &[StateId]) -> u64 {
    transient.iter().map(|&x| mdp.mask(x).len() as u64).sum()
}
