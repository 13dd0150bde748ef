//! Finite MDP and Markov-chain data model.
//!
//! Both structures are stored in a compressed sparse row layout. An [`Mdp`]
//! keeps, per state, a contiguous run of admissible `(state, action)` pairs
//! (the mask `U(x)`), and per pair a contiguous run of successor entries.
//! Every stored entry has strictly positive probability, so the stored
//! structure and the support of the kernel coincide.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on row sums accepted by validation.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Dense state index in `[0, state_count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn new(index: usize) -> Self {
        StateId(index as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense action index in `[0, action_count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl ActionId {
    #[inline]
    pub fn new(index: usize) -> Self {
        ActionId(index as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("row ({x}, {u}) sums to {sum}, not 1")]
    NonStochasticRow { x: StateId, u: ActionId, sum: f64 },
    #[error("state {x} has no admissible action")]
    EmptyMask { x: StateId },
    #[error("row ({x}, {u}) lists successor {xp} more than once")]
    DuplicateSuccessor { x: StateId, u: ActionId, xp: StateId },
    #[error("row ({x}, {u}) has negative probability {p} for successor {xp}")]
    NegativeProbability { x: StateId, u: ActionId, xp: StateId, p: f64 },
    #[error("row ({x}, {u}) stores a zero or non-finite probability for successor {xp}")]
    ZeroProbability { x: StateId, u: ActionId, xp: StateId },
    #[error("non-finite reward on row ({x}, {u}), successor {xp}")]
    NonFiniteReward { x: StateId, u: ActionId, xp: StateId },
    #[error("action {u} listed twice (or out of order) in the mask of state {x}")]
    DuplicateAction { x: StateId, u: ActionId },
    #[error("transition for ({x}, {u}) but {u} is not admissible in {x}")]
    UnmaskedTransition { x: StateId, u: ActionId },
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange { what: &'static str, index: usize, limit: usize },
    #[error("mask has {found} entries for {expected} states")]
    MaskLength { expected: usize, found: usize },
    #[error("discount {0} outside [0, 1]")]
    InvalidDiscount(f64),
    #[error("model has no states")]
    NoStates,
    #[error("policy chooses {u} in state {x}, which is not admissible")]
    InvalidPolicy { x: StateId, u: ActionId },
    #[error("policy has {found} choices for {expected} states")]
    PolicyLength { expected: usize, found: usize },
}

/// One stored successor of a `(state, action)` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub next: StateId,
    pub prob: f64,
    pub reward: f64,
}

/// Masked-action finite MDP with a sparse transition kernel and rewards
/// `r(x, u, x')` attached to each stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    action_count: usize,
    discount: f64,
    /// `pair_start[x]..pair_start[x + 1]` indexes the admissible pairs of `x`.
    pair_start: Vec<usize>,
    pair_action: Vec<ActionId>,
    /// `entry_start[k]..entry_start[k + 1]` indexes the row of pair `k`.
    entry_start: Vec<usize>,
    entries: Vec<Entry>,
}

impl Mdp {
    pub fn state_count(&self) -> usize {
        self.pair_start.len() - 1
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Returns a copy with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Mdp, ModelError> {
        check_discount(discount)?;
        let mut m = self.clone();
        m.discount = discount;
        Ok(m)
    }

    /// Total number of admissible `(state, action)` pairs.
    pub fn pair_count(&self) -> usize {
        self.pair_action.len()
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Pair indices of the admissible actions of `x`, in ascending action order.
    #[inline]
    pub fn pairs(&self, x: StateId) -> Range<usize> {
        self.pair_start[x.index()]..self.pair_start[x.index() + 1]
    }

    /// The admissible actions `U(x)`, ascending.
    #[inline]
    pub fn mask(&self, x: StateId) -> &[ActionId] {
        &self.pair_action[self.pairs(x)]
    }

    #[inline]
    pub fn pair_action(&self, pair: usize) -> ActionId {
        self.pair_action[pair]
    }

    /// The stored row of a pair, sorted by successor.
    #[inline]
    pub fn row(&self, pair: usize) -> &[Entry] {
        &self.entries[self.entry_start[pair]..self.entry_start[pair + 1]]
    }

    pub fn pair_index(&self, x: StateId, u: ActionId) -> Option<usize> {
        let range = self.pairs(x);
        let start = range.start;
        self.pair_action[range].binary_search(&u).ok().map(|offset| start + offset)
    }

    pub fn row_for(&self, x: StateId, u: ActionId) -> Option<&[Entry]> {
        self.pair_index(x, u).map(|k| self.row(k))
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + Clone {
        (0..self.state_count()).map(StateId::new)
    }

    /// Expected immediate reward `r(x, u) = sum_x' p(x'|x,u) r(x,u,x')` of a pair.
    pub fn expected_reward(&self, pair: usize) -> f64 {
        self.row(pair).iter().map(|e| e.prob * e.reward).sum()
    }

    /// Wraps a chain as a single-action MDP; missing rewards are zero.
    pub fn from_chain(chain: &MarkovChain, discount: f64) -> Result<Mdp, ModelError> {
        let mut b = MdpBuilder::new(1, discount);
        for x in chain.states() {
            b.add_state();
            b.add_action(ActionId(0));
            for (k, e) in chain.entry_range(x).zip(chain.successors(x)) {
                b.add_transition(e.0, e.1, chain.reward_at(k));
            }
        }
        b.build()
    }

    /// Reads the JSON model-file representation.
    pub fn from_model(model: &ModelFile) -> Result<Mdp, ModelError> {
        if model.mask.len() != model.states {
            return Err(ModelError::MaskLength { expected: model.states, found: model.mask.len() });
        }
        // rows[x][slot] collects the transitions for mask[x][slot]
        let mut rows: Vec<Vec<Vec<&TransitionRecord>>> = model.mask.iter().map(|m| vec![Vec::new(); m.len()]).collect();
        for (x, m) in model.mask.iter().enumerate() {
            for (slot, &u) in m.iter().enumerate() {
                check_index("action", u as usize, model.actions)?;
                if slot > 0 && m[slot - 1] >= u {
                    return Err(ModelError::DuplicateAction { x: StateId::new(x), u: ActionId(u) });
                }
            }
        }
        for t in &model.transitions {
            check_index("state", t.x as usize, model.states)?;
            check_index("state", t.xp as usize, model.states)?;
            check_index("action", t.u as usize, model.actions)?;
            let mask = &model.mask[t.x as usize];
            let slot = mask
                .binary_search(&t.u)
                .map_err(|_| ModelError::UnmaskedTransition { x: StateId(t.x), u: ActionId(t.u) })?;
            rows[t.x as usize][slot].push(t);
        }
        let mut b = MdpBuilder::new(model.actions, model.discount);
        for (x, m) in model.mask.iter().enumerate() {
            b.add_state();
            for (slot, &u) in m.iter().enumerate() {
                b.add_action(ActionId(u));
                for t in &rows[x][slot] {
                    b.add_transition(StateId(t.xp), t.p, t.r);
                }
            }
        }
        b.build()
    }

    /// Writes the JSON model-file representation (rows in stored order).
    pub fn to_model(&self) -> ModelFile {
        let mut transitions = Vec::with_capacity(self.entries.len());
        let mut mask = Vec::with_capacity(self.state_count());
        for x in self.states() {
            mask.push(self.mask(x).iter().map(|u| u.0).collect());
            for k in self.pairs(x) {
                for e in self.row(k) {
                    transitions.push(TransitionRecord {
                        x: x.0,
                        u: self.pair_action(k).0,
                        xp: e.next.0,
                        p: e.prob,
                        r: e.reward,
                    });
                }
            }
        }
        ModelFile { states: self.state_count(), actions: self.action_count, discount: self.discount, mask, transitions }
    }

    pub fn from_json(text: &str) -> Result<Mdp, LoadError> {
        let model: ModelFile = serde_json::from_str(text)?;
        Ok(Mdp::from_model(&model)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_model()).expect("model serialization is infallible")
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Invalid(#[from] ModelError),
}

/// On-disk model description. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: usize,
    pub actions: usize,
    pub discount: f64,
    pub mask: Vec<Vec<u32>>,
    pub transitions: Vec<TransitionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub x: u32,
    pub u: u32,
    pub xp: u32,
    pub p: f64,
    pub r: f64,
}

fn check_index(what: &'static str, index: usize, limit: usize) -> Result<(), ModelError> {
    if index < limit {
        Ok(())
    } else {
        Err(ModelError::IndexOutOfRange { what, index, limit })
    }
}

fn check_discount(discount: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&discount) {
        Ok(())
    } else {
        Err(ModelError::InvalidDiscount(discount))
    }
}

/// Incremental, row-ordered construction of an [`Mdp`].
///
/// States are appended in index order; within a state, actions must be added
/// in strictly ascending order. Rows are sorted by successor on `build`.
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    action_count: usize,
    discount: f64,
    pair_start: Vec<usize>,
    pair_action: Vec<ActionId>,
    entry_start: Vec<usize>,
    entries: Vec<Entry>,
}

impl MdpBuilder {
    pub fn new(action_count: usize, discount: f64) -> Self {
        MdpBuilder {
            action_count,
            discount,
            pair_start: vec![0],
            pair_action: Vec::new(),
            entry_start: vec![0],
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(action_count: usize, discount: f64, states: usize, pairs: usize, entries: usize) -> Self {
        let mut b = MdpBuilder::new(action_count, discount);
        b.pair_start.reserve(states);
        b.pair_action.reserve(pairs);
        b.entry_start.reserve(pairs);
        b.entries.reserve(entries);
        b
    }

    /// Starts the next state and returns its id.
    pub fn add_state(&mut self) -> StateId {
        let id = StateId::new(self.pair_start.len() - 1);
        self.pair_start.push(self.pair_action.len());
        id
    }

    /// Opens a row for action `u` of the current state.
    pub fn add_action(&mut self, u: ActionId) {
        assert!(self.pair_start.len() > 1, "add_state must precede add_action");
        self.pair_action.push(u);
        *self.pair_start.last_mut().unwrap() = self.pair_action.len();
        self.entry_start.push(self.entries.len());
    }

    /// Appends a successor to the currently open row.
    pub fn add_transition(&mut self, next: StateId, prob: f64, reward: f64) {
        assert!(!self.pair_action.is_empty(), "add_action must precede add_transition");
        self.entries.push(Entry { next, prob, reward });
        *self.entry_start.last_mut().unwrap() = self.entries.len();
    }

    pub fn build(mut self) -> Result<Mdp, ModelError> {
        check_discount(self.discount)?;
        let n = self.pair_start.len() - 1;
        if n == 0 {
            return Err(ModelError::NoStates);
        }
        for x in 0..n {
            let sx = StateId::new(x);
            let pairs = self.pair_start[x]..self.pair_start[x + 1];
            if pairs.is_empty() {
                return Err(ModelError::EmptyMask { x: sx });
            }
            for k in pairs.clone() {
                let u = self.pair_action[k];
                check_index("action", u.index(), self.action_count)?;
                if k > pairs.start && self.pair_action[k - 1] >= u {
                    return Err(ModelError::DuplicateAction { x: sx, u });
                }
                let row = &mut self.entries[self.entry_start[k]..self.entry_start[k + 1]];
                validate_row(sx, u, row, n)?;
            }
        }
        Ok(Mdp {
            action_count: self.action_count,
            discount: self.discount,
            pair_start: self.pair_start,
            pair_action: self.pair_action,
            entry_start: self.entry_start,
            entries: self.entries,
        })
    }
}

/// Checks one row in place and sorts it by successor.
fn validate_row(x: StateId, u: ActionId, row: &mut [Entry], n: usize) -> Result<(), ModelError> {
    for e in row.iter() {
        check_index("state", e.next.index(), n)?;
        if e.prob < 0.0 {
            return Err(ModelError::NegativeProbability { x, u, xp: e.next, p: e.prob });
        }
        if !(e.prob > 0.0 && e.prob.is_finite()) {
            return Err(ModelError::ZeroProbability { x, u, xp: e.next });
        }
        if !e.reward.is_finite() {
            return Err(ModelError::NonFiniteReward { x, u, xp: e.next });
        }
    }
    row.sort_by_key(|e| e.next);
    if let Some(w) = row.windows(2).find(|w| w[0].next == w[1].next) {
        return Err(ModelError::DuplicateSuccessor { x, u, xp: w[0].next });
    }
    let sum: f64 = row.iter().map(|e| e.prob).sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(ModelError::NonStochasticRow { x, u, sum });
    }
    Ok(())
}

/// Row-stochastic sparse Markov chain with optional per-entry rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    row_start: Vec<usize>,
    entries: Vec<(StateId, f64)>,
    rewards: Option<Vec<f64>>,
}

impl MarkovChain {
    /// Builds a chain from per-state rows of `(successor, probability)`.
    pub fn from_rows(rows: Vec<Vec<(StateId, f64)>>) -> Result<MarkovChain, ModelError> {
        let n = rows.len();
        if n == 0 {
            return Err(ModelError::NoStates);
        }
        let mut row_start = Vec::with_capacity(n + 1);
        row_start.push(0);
        let mut entries = Vec::new();
        for (x, row) in rows.into_iter().enumerate() {
            let mut tmp: Vec<Entry> = row.into_iter().map(|(next, prob)| Entry { next, prob, reward: 0.0 }).collect();
            validate_row(StateId::new(x), ActionId(0), &mut tmp, n)?;
            entries.extend(tmp.into_iter().map(|e| (e.next, e.prob)));
            row_start.push(entries.len());
        }
        Ok(MarkovChain { row_start, entries, rewards: None })
    }

    pub fn state_count(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + Clone {
        (0..self.state_count()).map(StateId::new)
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// The strictly positive successor entries of `x`, sorted by successor.
    #[inline]
    pub fn successors(&self, x: StateId) -> &[(StateId, f64)] {
        &self.entries[self.entry_range(x)]
    }

    #[inline]
    pub fn entry_range(&self, x: StateId) -> Range<usize> {
        self.row_start[x.index()]..self.row_start[x.index() + 1]
    }

    pub fn rewards(&self) -> Option<&[f64]> {
        self.rewards.as_deref()
    }

    fn reward_at(&self, k: usize) -> f64 {
        self.rewards.as_ref().map_or(0.0, |r| r[k])
    }

    /// `p(x, {x})`.
    pub fn self_loop_prob(&self, x: StateId) -> f64 {
        let row = self.successors(x);
        row.binary_search_by_key(&x, |e| e.0).map_or(0.0, |i| row[i].1)
    }

    /// Inverse-CDF draw of a successor of `x` from a uniform `u01` in `[0, 1)`.
    pub fn sample_next(&self, x: StateId, u01: f64) -> StateId {
        sample_row(self.successors(x).iter().map(|e| (e.0, e.1)), u01)
    }
}

pub(crate) fn sample_row(row: impl Iterator<Item = (StateId, f64)>, u01: f64) -> StateId {
    let mut acc = 0.0;
    let mut last = None;
    for (next, p) in row {
        acc += p;
        if u01 < acc {
            return next;
        }
        last = Some(next);
    }
    // row sums may fall a hair short of 1
    last.expect("rows are never empty")
}

/// Deterministic policy: one admissible action per state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    pub choice: Vec<ActionId>,
}

impl Policy {
    /// The policy choosing the lowest admissible action everywhere.
    pub fn first_admissible(mdp: &Mdp) -> Policy {
        Policy { choice: mdp.states().map(|x| mdp.mask(x)[0]).collect() }
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<(), ModelError> {
        if self.choice.len() != mdp.state_count() {
            return Err(ModelError::PolicyLength { expected: mdp.state_count(), found: self.choice.len() });
        }
        for x in mdp.states() {
            let u = self.choice[x.index()];
            if mdp.pair_index(x, u).is_none() {
                return Err(ModelError::InvalidPolicy { x, u });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn action(&self, x: StateId) -> ActionId {
        self.choice[x.index()]
    }
}

/// State values and action values over admissible pairs.
///
/// `q` is indexed by pair index (see [`Mdp::pairs`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(mdp: &Mdp) -> Self {
        ValueTable { v: vec![0.0; mdp.state_count()], q: vec![0.0; mdp.pair_count()] }
    }

    pub fn q(&self, mdp: &Mdp, x: StateId, u: ActionId) -> Option<f64> {
        mdp.pair_index(x, u).map(|k| self.q[k])
    }
}

/// The chain induced by a deterministic policy: row `x` is the row of
/// `(x, policy(x))`, copied entry for entry along with its rewards.
pub fn induced_chain(mdp: &Mdp, policy: &Policy) -> Result<MarkovChain, ModelError> {
    policy.validate(mdp)?;
    let mut row_start = Vec::with_capacity(mdp.state_count() + 1);
    row_start.push(0);
    let mut entries = Vec::new();
    let mut rewards = Vec::new();
    for x in mdp.states() {
        let k = mdp.pair_index(x, policy.action(x)).expect("validated");
        for e in mdp.row(k) {
            entries.push((e.next, e.prob));
            rewards.push(e.reward);
        }
        row_start.push(entries.len());
    }
    Ok(MarkovChain { row_start, entries, rewards: Some(rewards) })
}

/// Support of row `x` of `chain`: all strictly positive successor entries.
pub fn successors(chain: &MarkovChain, x: StateId) -> Vec<(StateId, f64)> {
    chain.successors(x).to_vec()
}
