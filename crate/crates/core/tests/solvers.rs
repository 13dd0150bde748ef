mod common;

use common::*;
use proptest::prelude::*;
use reductive::domains::{
    build_fig2, build_liquidation, build_spiral, spiral_id, Fig2Variant, LiquidationParams, LiquidationState,
};
use reductive::mdp::{induced_chain, ActionId, Mdp, MdpBuilder, Policy, StateId};
use reductive::reachability::mdp_level_sets;
use reductive::solvers::*;

fn liquidation(q_max: u32, z_min: i64, z_max: i64) -> LiquidationParams {
    LiquidationParams { q_max, z_min, z_max, ..LiquidationParams::default() }
}

fn vi_oracle(mdp: &Mdp) -> SolveResult {
    let cfg = SolverConfig { epsilon: 1e-12, max_sweeps: 1_000_000, ..SolverConfig::default() };
    qvi_solve(mdp, &cfg, None).unwrap()
}

#[test]
fn liquidation_rvi_matches_iterative_vi() {
    let p = liquidation(20, 140, 160);
    let d = build_liquidation(&p).unwrap();
    let r = rvi_solve(&d.mdp, &d.schedule, &d.decomposition).unwrap();
    let vi = vi_oracle(&d.mdp);
    assert!(max_abs_diff(&r.values.v, &vi.values.v) <= 1e-6);
    assert!(bellman_residual(&d.mdp, &r.values.v) <= 1e-9);
    assert!(is_greedy_consistent(&d.mdp, &r));
    assert_eq!(r.stats.q_updates, transient_mask_total(&d.mdp, &d.decomposition.transient));
    assert_eq!(r.stats.sweeps, 1);
}

#[test]
fn liquidation_empty_inventory_is_worth_nothing() {
    let p = liquidation(5, 140, 160);
    let d = build_liquidation(&p).unwrap();
    let r = rvi_solve(&d.mdp, &d.schedule, &d.decomposition).unwrap();
    assert!(r.stats.absorbing_shortcut);
    assert_eq!(r.stats.absorbing_updates, 0);
    for z in p.z_min..=p.z_max {
        assert_eq!(r.values.v[p.encode(LiquidationState { q: 0, z }).index()], 0.0);
    }
}

#[test]
fn liquidation_potential_schedule_agrees_with_inventory_schedule() {
    let p = liquidation(6, 145, 155);
    let d = build_liquidation(&p).unwrap();
    let (levels, decomp) = mdp_level_sets(&d.mdp).unwrap();
    let by_inventory = rvi_solve(&d.mdp, &d.schedule, &d.decomposition).unwrap();
    let by_potential = rvi_solve(&d.mdp, &levels, &decomp).unwrap();
    assert_eq!(by_inventory.values, by_potential.values);
    assert_eq!(by_inventory.policy, by_potential.policy);
}

#[test]
fn reversed_levels_need_one_sweep_per_inventory_level() {
    let d = build_liquidation(&liquidation(50, 50, 250)).unwrap();
    let cfg = SolverConfig::with_ordering(SweepOrdering::ReversedLevelSets);
    let r = qvi_solve(&d.mdp, &cfg, Some(&d.schedule)).unwrap();
    assert!(r.stats.sweeps >= 25, "sweeps {}", r.stats.sweeps);
}

#[test]
fn all_solvers_agree_on_liquidation() {
    let d = build_liquidation(&liquidation(12, 140, 160)).unwrap();
    let rvi = rvi_solve(&d.mdp, &d.schedule, &d.decomposition).unwrap();
    let cfg = SolverConfig::default();
    let bvi = bvi_solve(&d.mdp, &d.decomposition, &cfg).unwrap();
    let random = qvi_solve(
        &d.mdp,
        &SolverConfig { seed: 3, ..SolverConfig::with_ordering(SweepOrdering::RandomPerSweep) },
        Some(&d.schedule),
    )
    .unwrap();
    for other in [&bvi, &random] {
        assert!(max_abs_diff(&rvi.values.v, &other.values.v) <= 1e-6);
    }
    assert!(bvi.stats.q_updates >= rvi.stats.q_updates);
}

#[test]
fn random_sweeps_are_seed_deterministic() {
    let d = build_liquidation(&liquidation(8, 145, 155)).unwrap();
    let cfg = SolverConfig { seed: 11, ..SolverConfig::with_ordering(SweepOrdering::RandomPerSweep) };
    let a = qvi_solve(&d.mdp, &cfg, Some(&d.schedule)).unwrap();
    let b = qvi_solve(&d.mdp, &cfg, Some(&d.schedule)).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.stats.sweeps, b.stats.sweeps);
}

#[test]
fn sell_everything_absorbs_in_one_step() {
    let p = liquidation(2, 140, 160);
    let d = build_liquidation(&p).unwrap();
    let sell_all = Policy { choice: d.mdp.states().map(|x| *d.mdp.mask(x).last().unwrap()).collect() };
    let chain = induced_chain(&d.mdp, &sell_all).unwrap();
    for x in &d.decomposition.transient {
        assert!(chain.successors(*x).iter().all(|(y, _)| p.decode(*y).q == 0));
    }
    let start = p.encode(LiquidationState { q: 2, z: p.z0 });
    for t in simulate_policy(&d.mdp, &sell_all, start, 100, 200, 5).unwrap() {
        assert_eq!(t.actions.len(), 1);
        assert!(t.absorbed);
    }
}

/// Every deterministic policy on the three branch cells, with the extreme
/// mix levels only, evaluated directly.
#[test]
fn spiral_optimum_takes_the_shorter_path_everywhere() {
    let d = build_spiral(-1.0, &[0.0, 1.0]).unwrap();
    let r = rvi_solve(&d.mdp, &d.schedule, &d.decomposition).unwrap();
    let branches: Vec<StateId> = d.mdp.states().filter(|&x| d.mdp.mask(x).len() == 2).collect();
    assert_eq!(branches, vec![spiral_id(2, 0), spiral_id(2, 1), spiral_id(2, 3)]);

    let mut best: Option<(f64, Policy)> = None;
    for bits in 0..(1u32 << branches.len()) {
        let mut p = Policy::first_admissible(&d.mdp);
        for (i, &x) in branches.iter().enumerate() {
            p.choice[x.index()] = ActionId((bits >> i) & 1);
        }
        let v = evaluate_policy(&d.mdp, &p, 30);
        let total: f64 = v.iter().sum();
        if best.as_ref().is_none_or(|b| total > b.0) {
            best = Some((total, p));
        }
    }
    let (_, best) = best.unwrap();
    for &x in &branches {
        assert_eq!(best.action(x), ActionId(1));
        assert_eq!(r.policy.action(x), ActionId(1));
    }
    assert_eq!(r.values.v[spiral_id(0, 0).index()], -4.0);
    assert!(max_abs_diff(&r.values.v, &evaluate_policy(&d.mdp, &best, 30)) < 1e-12);
}

#[test]
fn spiral_backward_iteration_revisits_states() {
    let d = build_spiral(-1.0, &reductive::domains::DEFAULT_MIX_LEVELS).unwrap();
    let rvi = rvi_solve(&d.mdp, &d.schedule, &d.decomposition).unwrap();
    let bvi = bvi_solve(&d.mdp, &d.decomposition, &SolverConfig::default()).unwrap();
    assert!(bvi.stats.q_updates > rvi.stats.q_updates);
    assert!(bvi.stats.sweeps >= 2);
    assert!(max_abs_diff(&rvi.values.v, &bvi.values.v) < 1e-9);
    assert!(max_abs_diff(&rvi.values.v, &vi_oracle(&d.mdp).values.v) <= 1e-6);
}

#[test]
fn fig2_zero_rewards_give_zero_values() {
    for variant in [Fig2Variant::A, Fig2Variant::B] {
        let chain = build_fig2(variant, 0.5).unwrap();
        let mdp = Mdp::from_chain(&chain, 1.0).unwrap();
        let (sched, decomp) = mdp_level_sets(&mdp).unwrap();
        let r = rvi_solve(&mdp, &sched, &decomp).unwrap();
        assert!(r.values.v.iter().all(|&v| v == 0.0));
        assert_eq!(r.stats.q_updates, decomp.transient.len() as u64);
    }
}

#[test]
fn export_has_the_documented_fields() {
    let d = build_liquidation(&liquidation(3, 148, 152)).unwrap();
    let r = rvi_solve(&d.mdp, &d.schedule, &d.decomposition).unwrap();
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["v"].as_array().unwrap().len(), d.mdp.state_count());
    assert_eq!(json["policy"].as_array().unwrap().len(), d.mdp.state_count());
    let stats = json["stats"].as_object().unwrap();
    let mut keys: Vec<&str> = stats.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["converged", "q_updates", "residual", "sweeps", "wall_nanos"]);
    assert!(stats["wall_nanos"].as_u64().unwrap() >= 1);
}

// ---- randomized reductive MDPs ----------------------------------------------

/// Transient states only move to higher ids (or loop with probability < 1);
/// the last state absorbs with zero reward.
fn arb_reductive_mdp() -> impl Strategy<Value = Mdp> {
    (2usize..10, 0.5f64..=1.0).prop_flat_map(|(n, gamma)| {
        let rows = proptest::collection::vec(
            proptest::collection::vec(
                (proptest::collection::vec((0usize..n, 1u32..5), 1..=3), 0u32..3, -5.0f64..5.0),
                1..=3,
            ),
            n - 1,
        );
        rows.prop_map(move |states| {
            let mut b = MdpBuilder::new(3, gamma);
            for (x, actions) in states.into_iter().enumerate() {
                b.add_state();
                for (u, (succ, loop_w, reward)) in actions.into_iter().enumerate() {
                    b.add_action(ActionId::new(u));
                    let mut row: Vec<(usize, u32)> = Vec::new();
                    for (y, w) in succ {
                        let y = x + 1 + y % (n - 1 - x);
                        match row.iter_mut().find(|e| e.0 == y) {
                            Some(e) => e.1 += w,
                            None => row.push((y, w)),
                        }
                    }
                    if loop_w > 0 {
                        row.push((x, loop_w));
                    }
                    let total: u32 = row.iter().map(|e| e.1).sum();
                    for (y, w) in row {
                        b.add_transition(StateId::new(y), w as f64 / total as f64, reward);
                    }
                }
            }
            b.add_state();
            b.add_action(ActionId(0));
            b.add_transition(StateId::new(n - 1), 1.0, 0.0);
            b.build().unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rvi_matches_value_iteration(mdp in arb_reductive_mdp()) {
        let (sched, decomp) = mdp_level_sets(&mdp).unwrap();
        let r = rvi_solve(&mdp, &sched, &decomp).unwrap();
        let vi = vi_oracle(&mdp);
        prop_assert!(max_abs_diff(&r.values.v, &vi.values.v) < 1e-8);
        prop_assert!(bellman_residual(&mdp, &r.values.v) < 1e-9);
        prop_assert_eq!(r.stats.q_updates, transient_mask_total(&mdp, &decomp.transient));
        prop_assert!(is_greedy_consistent(&mdp, &r));
    }

    #[test]
    fn bvi_matches_rvi(mdp in arb_reductive_mdp()) {
        let (sched, decomp) = mdp_level_sets(&mdp).unwrap();
        let r = rvi_solve(&mdp, &sched, &decomp).unwrap();
        let b = bvi_solve(&mdp, &decomp, &SolverConfig::default()).unwrap();
        prop_assert!(max_abs_diff(&r.values.v, &b.values.v) < 1e-8);
        prop_assert!(b.stats.q_updates >= r.stats.q_updates);
    }

    /// The closed form against direct iteration of `q <- r + gamma (alpha q + (1 - alpha) w)`.
    #[test]
    fn closed_form_self_loop(alpha in 0.0f64..1.0, gamma in 0.01f64..=1.0, r in -10.0f64..10.0, w in -10.0f64..10.0) {
        prop_assume!(gamma * alpha <= 0.99);
        let mut b = MdpBuilder::new(1, gamma);
        b.add_state();
        b.add_action(ActionId(0));
        if alpha > 0.0 {
            b.add_transition(StateId(0), alpha, r);
        }
        b.add_transition(StateId(1), 1.0 - alpha, r);
        b.add_state();
        b.add_action(ActionId(0));
        b.add_transition(StateId(1), 1.0, 0.0);
        let mdp = b.build().unwrap();
        let q = q_update(&mdp, &[0.0, w], StateId(0), ActionId(0)).unwrap();
        let mut it = 0.0;
        for _ in 0..10_000 {
            it = r + gamma * (alpha * it + (1.0 - alpha) * w);
        }
        prop_assert!((q - it).abs() <= 1e-10 * (1.0 + it.abs()), "closed {} iterated {}", q, it);
    }
}
