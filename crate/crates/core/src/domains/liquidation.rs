//! Optimal liquidation of an inventory against a reflected trinomial price.
//!
//! State `(q, z)`: inventory `q in [0, q_max]`, integer price
//! `z in [z_min, z_max]`. Selling `u in {1..q}` units moves to `q - u` while
//! the price takes one clamped step of `-1, 0, +1`. Inventory zero is the
//! absorbing slice, where only `u = 0` is admissible and rewards vanish.

use serde::{Deserialize, Serialize};

use crate::mdp::{ActionId, MdpBuilder, StateId};
use crate::reachability::{AbsorbingDecomposition, LevelSetSchedule};

use super::{DomainError, DomainModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiquidationParams {
    pub q_max: u32,
    pub z_min: i64,
    pub z_max: i64,
    pub z0: i64,
    pub p_down: f64,
    pub p_stay: f64,
    pub p_up: f64,
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub discount: f64,
}

impl Default for LiquidationParams {
    fn default() -> Self {
        LiquidationParams {
            q_max: 100,
            z_min: 50,
            z_max: 250,
            z0: 150,
            p_down: 0.4,
            p_stay: 0.2,
            p_up: 0.4,
            w0: 1.0,
            w1: 0.2,
            w2: 0.002,
            discount: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LiquidationState {
    pub q: u32,
    pub z: i64,
}

impl LiquidationParams {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::InvalidParams(m));
        if self.q_max == 0 {
            return bad("q_max must be positive".into());
        }
        if !(0 < self.z_min && self.z_min < self.z_max) {
            return bad(format!("price bounds need 0 < z_min < z_max, got [{}, {}]", self.z_min, self.z_max));
        }
        if !(self.z_min..=self.z_max).contains(&self.z0) {
            return bad(format!("z0 = {} outside [{}, {}]", self.z0, self.z_min, self.z_max));
        }
        let p = [self.p_down, self.p_stay, self.p_up];
        if p.iter().any(|&x| !x.is_finite() || x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad(format!("price probabilities {p:?} are not a distribution"));
        }
        // a one-sided walk leaves the empty-inventory slice without a single
        // closed class, so the inventory schedule would miss transient states
        if (self.p_down == 0.0) != (self.p_up == 0.0) {
            return bad("p_down and p_up must be both positive or both zero".into());
        }
        if [self.w0, self.w1, self.w2].iter().any(|&w| !w.is_finite() || w < 0.0) {
            return bad("reward weights must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0, 1]", self.discount));
        }
        Ok(())
    }

    pub fn price_count(&self) -> usize {
        (self.z_max - self.z_min + 1) as usize
    }

    pub fn state_count(&self) -> usize {
        (self.q_max as usize + 1) * self.price_count()
    }

    pub fn encode(&self, s: LiquidationState) -> StateId {
        StateId::new(s.q as usize * self.price_count() + (s.z - self.z_min) as usize)
    }

    pub fn decode(&self, x: StateId) -> LiquidationState {
        let n = self.price_count();
        LiquidationState { q: (x.index() / n) as u32, z: self.z_min + (x.index() % n) as i64 }
    }

    /// `w0 u (z - z0) - w1 u^2 - w2 q^2`, with the pre-trade inventory.
    pub fn reward(&self, q: u32, z: i64, u: u32) -> f64 {
        let (q, u) = (q as f64, u as f64);
        self.w0 * u * (z - self.z0) as f64 - self.w1 * u * u - self.w2 * q * q
    }

    /// Clamped one-step price distribution from `z`, ascending, zero
    /// entries dropped.
    pub fn price_row(&self, z: i64) -> Vec<(i64, f64)> {
        let mut row: Vec<(i64, f64)> = Vec::with_capacity(3);
        for (dz, p) in [(-1, self.p_down), (0, self.p_stay), (1, self.p_up)] {
            if p == 0.0 {
                continue;
            }
            let next = (z + dz).clamp(self.z_min, self.z_max);
            match row.last_mut() {
                Some(last) if last.0 == next => last.1 += p,
                _ => row.push((next, p)),
            }
        }
        row
    }
}

/// Builds the liquidation MDP. The schedule solves inventory levels
/// `1..=q_max` in ascending order, each level covering every price.
pub fn build_liquidation(params: &LiquidationParams) -> Result<DomainModel, DomainError> {
    params.validate()?;
    let nz = params.price_count();
    let q_max = params.q_max as usize;
    let pairs = nz + nz * q_max * (q_max + 1) / 2;
    let mut b = MdpBuilder::with_capacity(q_max + 1, params.discount, params.state_count(), pairs, 3 * pairs);

    let rows: Vec<Vec<(i64, f64)>> = (params.z_min..=params.z_max).map(|z| params.price_row(z)).collect();
    for q in 0..=params.q_max {
        for z in params.z_min..=params.z_max {
            b.add_state();
            let row = &rows[(z - params.z_min) as usize];
            if q == 0 {
                b.add_action(ActionId(0));
                for &(zn, p) in row {
                    b.add_transition(params.encode(LiquidationState { q: 0, z: zn }), p, 0.0);
                }
                continue;
            }
            for u in 1..=q {
                b.add_action(ActionId(u));
                let r = params.reward(q, z, u);
                for &(zn, p) in row {
                    b.add_transition(params.encode(LiquidationState { q: q - u, z: zn }), p, r);
                }
            }
        }
    }
    let mdp = b.build()?;

    let level = |q: usize| (q * nz..(q + 1) * nz).map(StateId::new).collect::<Vec<_>>();
    let schedule = LevelSetSchedule { levels: (1..=q_max).map(level).collect() };
    let absorbing = level(0);
    let classes =
        if params.p_up > 0.0 { vec![absorbing.clone()] } else { absorbing.iter().map(|&x| vec![x]).collect() };
    let decomposition = AbsorbingDecomposition {
        transient: (nz..params.state_count()).map(StateId::new).collect(),
        absorbing,
        classes,
    };
    Ok(DomainModel { mdp, schedule, decomposition })
}
