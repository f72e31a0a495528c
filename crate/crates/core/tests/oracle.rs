use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reusealloc::model::{build_instance, gap_instance, OutcomeEntry, SupportPoint, TableSpec};
use reusealloc::oracle::{dp_opt_ipc, dp_opt_ipc_with, enumerate_assortments, verify_fluid_bound, TinyInstanceGuard};
use reusealloc::suite::{random_table, tiny_table};
use reusealloc::Error;

fn point(prob: f64, w: f64, a: f64, d: u32) -> SupportPoint {
    SupportPoint {
        prob,
        w: vec![w],
        a: vec![a],
        d: vec![d],
    }
}

fn single_resource(cap: f64, p: Vec<f64>, n_actions: usize, outcomes: Vec<OutcomeEntry>) -> TableSpec {
    TableSpec {
        n_rewards: 1,
        n_resources: 1,
        n_types: p.len(),
        n_actions,
        capacities: vec![cap],
        null_type: Some(p.len() - 1),
        arrival_probs: p,
        null_action: Some(0),
        horizon_hint: None,
        outcomes,
    }
}

#[test]
fn one_step_gap_instance() {
    let dp = dp_opt_ipc(&gap_instance(2).unwrap(), 1).unwrap();
    assert_eq!(dp.total, 1.0);
}

// k_1 at t = 1 frees its unit before t = 2, so k_2 still fits:
// 3/4 + 1 over two steps.
#[test]
fn two_step_gap_instance() {
    let dp = dp_opt_ipc(&gap_instance(2).unwrap(), 2).unwrap();
    assert!((dp.per_step() - 0.875).abs() < 1e-12);
    assert_eq!(dp.actions[&(1, vec![0, 0], 0)], 1);
}

#[test]
fn zero_rewards_give_zero_value() {
    let spec = single_resource(
        2.0,
        vec![1.0, 0.0],
        2,
        vec![OutcomeEntry {
            type_index: 0,
            action: 1,
            support: vec![point(1.0, 0.0, 1.0, 2)],
        }],
    );
    let dp = dp_opt_ipc(&build_instance(&spec).unwrap(), 5).unwrap();
    assert_eq!(dp.total, 0.0);
}

// One unit per step for one step on a unit of capacity: nothing ever binds
// across steps, so the fluid bound is attained.
#[test]
fn deterministic_slack_instance_is_tight() {
    let spec = single_resource(
        1.0,
        vec![1.0, 0.0],
        2,
        vec![OutcomeEntry {
            type_index: 0,
            action: 1,
            support: vec![point(1.0, 0.6, 1.0, 1)],
        }],
    );
    let chk = verify_fluid_bound(&build_instance(&spec).unwrap(), 6).unwrap();
    assert!((chk.lp_e - 0.6).abs() < 1e-9);
    assert!((chk.dp - 0.6).abs() < 1e-12);
}

#[test]
fn fluid_bound_dominates_on_gap_instance() {
    for t in 1..=6 {
        let chk = verify_fluid_bound(&gap_instance(2).unwrap(), t).unwrap();
        assert!(chk.holds(1e-6), "T = {t}: {chk:?}");
        assert!(chk.duality_gap <= 1e-9);
    }
}

#[test]
fn fluid_bound_dominates_on_random_tiny_instances() {
    for seed in 0..50 {
        let inst = tiny_table(seed);
        let t = 1 + (seed as usize % 8);
        let chk = verify_fluid_bound(&inst, t).unwrap();
        assert!(chk.holds(1e-6), "seed {seed}: {chk:?}");
    }
}

#[test]
fn guard_rejects_large_or_unsupported_instances() {
    let gap = gap_instance(2).unwrap();
    assert!(matches!(dp_opt_ipc(&gap, 9), Err(Error::GuardViolation(_))));
    assert!(matches!(dp_opt_ipc(&gap, 0), Err(Error::GuardViolation(_))));
    assert!(matches!(dp_opt_ipc(&gap_instance(8).unwrap(), 2), Err(Error::GuardViolation(_))));
    assert!(matches!(dp_opt_ipc(&random_table(1, 2, 2, 1, 2), 2), Err(Error::GuardViolation(_))));
    let frac = single_resource(
        2.0,
        vec![1.0, 0.0],
        2,
        vec![OutcomeEntry {
            type_index: 0,
            action: 1,
            support: vec![point(1.0, 1.0, 0.5, 1)],
        }],
    );
    assert!(matches!(dp_opt_ipc(&build_instance(&frac).unwrap(), 2), Err(Error::GuardViolation(_))));
}

#[test]
fn enumeration_edge_cases() {
    assert_eq!(enumerate_assortments(&[], &[], 3).unwrap(), (vec![], 0.0));
    let (set, val) = enumerate_assortments(&[1.0, 1.0], &[1.0, 0.5], 1).unwrap();
    assert_eq!(set, vec![0]);
    assert!((val - 0.5).abs() < 1e-15);
    assert!(enumerate_assortments(&[1.0], &[1.0, 2.0], 1).is_err());
    assert!(matches!(enumerate_assortments(&vec![1.0; 60], &vec![1.0; 60], 30), Err(Error::TooLarge(_))));
}

/// Random single-resource table with two real actions.
fn random_spec(seed: u64) -> (TableSpec, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::new();
    for j in 0..2 {
        for k in 1..=2 {
            let n = rng.random_range(1..=2);
            let support = (0..n)
                .map(|_| {
                    point(
                        1.0 / n as f64,
                        rng.random_range(0.0..1.0),
                        rng.random_range(1..=2) as f64,
                        rng.random_range(1..=3),
                    )
                })
                .collect();
            outcomes.push(OutcomeEntry { type_index: j, action: k, support });
        }
    }
    let p0 = rng.random_range(0.2..0.8);
    let cap = rng.random_range(1..=3) as f64;
    let horizon = rng.random_range(1..=6);
    (single_resource(cap, vec![p0, 1.0 - p0, 0.0], 3, outcomes), horizon)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn dp_ignores_action_labels(seed in 0u64..10_000) {
        let (spec, t) = random_spec(seed);
        let mut swapped = spec.clone();
        for e in &mut swapped.outcomes {
            e.action = 3 - e.action;
        }
        let a = dp_opt_ipc(&build_instance(&spec).unwrap(), t).unwrap().total;
        let b = dp_opt_ipc(&build_instance(&swapped).unwrap(), t).unwrap().total;
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn dominated_action_changes_nothing(seed in 0u64..10_000) {
        let (spec, t) = random_spec(seed);
        let mut more = spec.clone();
        more.n_actions = 4;
        for j in 0..2 {
            more.outcomes.push(OutcomeEntry { type_index: j, action: 3, support: vec![point(1.0, 0.0, 1.0, 2)] });
        }
        let guard = TinyInstanceGuard { max_actions: 4, ..TinyInstanceGuard::default() };
        let a = dp_opt_ipc(&build_instance(&spec).unwrap(), t).unwrap().total;
        let b = dp_opt_ipc_with(&build_instance(&more).unwrap(), t, guard).unwrap().total;
        prop_assert!((a - b).abs() <= 1e-12);
    }
}
