//! Sparse support graphs and their strongly-connected condensation.

use crate::mdp::{MarkovChain, Mdp, StateId};

/// Directed support graph: an edge `x -> x'` exists iff `x'` has positive
/// probability from `x` (under some admissible action, for MDP unions).
///
/// Successor lists are sorted and free of duplicates; self-loops are kept as
/// ordinary edges. `loop_max[x]` is the largest one-step self-loop
/// probability of `x` over the represented kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGraph {
    offsets: Vec<usize>,
    targets: Vec<StateId>,
    loop_max: Vec<f64>,
}

impl SupportGraph {
    pub fn from_chain(chain: &MarkovChain) -> Self {
        let n = chain.state_count();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::with_capacity(chain.entry_count());
        let mut loop_max = Vec::with_capacity(n);
        for x in chain.states() {
            targets.extend(chain.successors(x).iter().map(|e| e.0));
            offsets.push(targets.len());
            loop_max.push(chain.self_loop_prob(x));
        }
        SupportGraph { offsets, targets, loop_max }
    }

    /// The union chain of an MDP: `successors(x)` is the union of the
    /// supports of every admissible action at `x`.
    pub fn union_of(mdp: &Mdp) -> Self {
        let n = mdp.state_count();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::with_capacity(mdp.entry_count());
        let mut loop_max = vec![0.0f64; n];
        let mut scratch = Vec::new();
        for x in mdp.states() {
            scratch.clear();
            for k in mdp.pairs(x) {
                for e in mdp.row(k) {
                    scratch.push(e.next);
                    if e.next == x {
                        loop_max[x.index()] = loop_max[x.index()].max(e.prob);
                    }
                }
            }
            scratch.sort_unstable();
            scratch.dedup();
            targets.extend_from_slice(&scratch);
            offsets.push(targets.len());
        }
        SupportGraph { offsets, targets, loop_max }
    }

    /// Builds a graph from explicit adjacency lists (self-loop probabilities
    /// are taken as 1 for listed self-edges).
    pub fn from_adjacency(adj: &[Vec<StateId>]) -> Self {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut loop_max = Vec::with_capacity(adj.len());
        for (x, succ) in adj.iter().enumerate() {
            let mut s = succ.clone();
            s.sort_unstable();
            s.dedup();
            loop_max.push(if s.contains(&StateId::new(x)) { 1.0 } else { 0.0 });
            targets.extend(s);
            offsets.push(targets.len());
        }
        SupportGraph { offsets, targets, loop_max }
    }

    #[inline]
    pub fn state_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub fn successors(&self, x: StateId) -> &[StateId] {
        &self.targets[self.offsets[x.index()]..self.offsets[x.index() + 1]]
    }

    #[inline]
    pub fn self_loop_prob(&self, x: StateId) -> f64 {
        self.loop_max[x.index()]
    }

    /// Edge-reversed graph (predecessor lists); self-loop data is kept.
    pub fn reversed(&self) -> SupportGraph {
        let n = self.state_count();
        let mut counts = vec![0usize; n + 1];
        for t in &self.targets {
            counts[t.index() + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut targets = vec![StateId(0); self.targets.len()];
        // ascending source order keeps each predecessor list sorted
        for x in 0..n {
            for &t in self.successors(StateId::new(x)) {
                targets[fill[t.index()]] = StateId::new(x);
                fill[t.index()] += 1;
            }
        }
        SupportGraph { offsets, targets, loop_max: self.loop_max.clone() }
    }
}

/// Strongly-connected components of a [`SupportGraph`], numbered in reverse
/// topological order: every edge between distinct components goes from a
/// higher component index to a lower one.
#[derive(Debug, Clone)]
pub(crate) struct Condensation {
    pub comp_of: Vec<u32>,
    member_start: Vec<usize>,
    members: Vec<StateId>,
    succ_start: Vec<usize>,
    succ: Vec<u32>,
}

const UNVISITED: u32 = u32::MAX;

impl Condensation {
    /// Iterative Tarjan; linear in states plus edges.
    pub fn new(g: &SupportGraph) -> Self {
        let n = g.state_count();
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0u32; n];
        let mut on_stack = vec![false; n];
        let mut stack: Vec<u32> = Vec::new();
        let mut frames: Vec<(u32, usize)> = Vec::new();
        let mut comp_of = vec![UNVISITED; n];
        let mut member_start = vec![0usize];
        let mut members = Vec::with_capacity(n);
        let mut counter = 0u32;

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root as u32);
            on_stack[root] = true;
            frames.push((root as u32, g.offsets[root]));

            while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
                let v = v as usize;
                if *pos < g.offsets[v + 1] {
                    let w = g.targets[*pos].index();
                    *pos += 1;
                    if index[w] == UNVISITED {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w as u32);
                        on_stack[w] = true;
                        frames.push((w as u32, g.offsets[w]));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                    continue;
                }
                frames.pop();
                if low[v] == index[v] {
                    let c = (member_start.len() - 1) as u32;
                    loop {
                        let w = stack.pop().expect("tarjan stack") as usize;
                        on_stack[w] = false;
                        comp_of[w] = c;
                        members.push(StateId::new(w));
                        if w == v {
                            break;
                        }
                    }
                    let start = *member_start.last().unwrap();
                    members[start..].sort_unstable();
                    member_start.push(members.len());
                }
                if let Some(&(parent, _)) = frames.last() {
                    let p = parent as usize;
                    low[p] = low[p].min(low[v]);
                }
            }
        }

        let comps = member_start.len() - 1;
        let mut succ_start = Vec::with_capacity(comps + 1);
        succ_start.push(0);
        let mut succ = Vec::new();
        let mut scratch = Vec::new();
        for c in 0..comps {
            scratch.clear();
            for &x in &members[member_start[c]..member_start[c + 1]] {
                for &w in g.successors(x) {
                    let cw = comp_of[w.index()];
                    if cw != c as u32 {
                        scratch.push(cw);
                    }
                }
            }
            scratch.sort_unstable();
            scratch.dedup();
            succ.extend_from_slice(&scratch);
            succ_start.push(succ.len());
        }
        Condensation { comp_of, member_start, members, succ_start, succ }
    }

    pub fn len(&self) -> usize {
        self.member_start.len() - 1
    }

    pub fn members(&self, c: usize) -> &[StateId] {
        &self.members[self.member_start[c]..self.member_start[c + 1]]
    }

    pub fn successors(&self, c: usize) -> &[u32] {
        &self.succ[self.succ_start[c]..self.succ_start[c + 1]]
    }

    /// A component is closed when no edge leaves it.
    pub fn is_closed(&self, c: usize) -> bool {
        self.successors(c).is_empty()
    }

    /// Number of states reachable from each component (including itself).
    ///
    /// Reachable-component sets are propagated as bitsets in reverse
    /// topological order, one column block at a time, so peak memory stays
    /// at `O(components * BLOCK / 8)` bytes while the counts are exact.
    #[allow(clippy::needless_range_loop)]
    pub fn reach_counts(&self) -> Vec<usize> {
        const BLOCK: usize = 4096;
        const WORDS: usize = BLOCK / 64;
        let comps = self.len();
        let sizes: Vec<usize> = (0..comps).map(|c| self.members(c).len()).collect();
        let mut counts = vec![0usize; comps];
        let mut bits: Vec<u64> = Vec::new();

        let mut lo = 0;
        while lo < comps {
            let hi = (lo + BLOCK).min(comps);
            let unit = sizes[lo..hi].iter().all(|&s| s == 1);
            // components below `lo` cannot reach any component in [lo, hi)
            let rows = comps - lo;
            bits.clear();
            bits.resize(rows * WORDS, 0);
            for c in lo..comps {
                let row = (c - lo) * WORDS;
                if c < hi {
                    let b = c - lo;
                    bits[row + b / 64] |= 1u64 << (b % 64);
                }
                for &s in self.successors(c) {
                    let s = s as usize;
                    if s < lo {
                        continue;
                    }
                    let src = (s - lo) * WORDS;
                    let (head, tail) = bits.split_at_mut(row);
                    for (dst, &w) in tail[..WORDS].iter_mut().zip(&head[src..src + WORDS]) {
                        *dst |= w;
                    }
                }
                let words = &bits[row..row + WORDS];
                counts[c] += if unit {
                    words.iter().map(|w| w.count_ones() as usize).sum::<usize>()
                } else {
                    let mut total = 0;
                    for (i, &w) in words.iter().enumerate() {
                        let mut w = w;
                        while w != 0 {
                            let b = w.trailing_zeros() as usize;
                            total += sizes[lo + i * 64 + b];
                            w &= w - 1;
                        }
                    }
                    total
                };
            }
            lo = hi;
        }
        counts
    }
}
