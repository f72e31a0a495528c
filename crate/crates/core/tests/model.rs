use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reusealloc::model::{
    build_instance, gap_instance, sample_arrival, Bounds, OutcomeEntry, SupportBounds, SupportPoint, TableSpec,
};
use reusealloc::suite::random_table;
use reusealloc::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn degenerate_arrivals() {
    let mut r = rng(0);
    assert!((0..100).all(|_| sample_arrival(&mut r, &[1.0]).unwrap() == 0));
}

#[test]
fn arrivals_reproducible_under_seed() {
    let draw = |seed| {
        let mut r = rng(seed);
        (0..50).map(|_| sample_arrival(&mut r, &[0.5, 0.5]).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(9), draw(9));
    assert_ne!(draw(9), draw(10));
}

#[test]
fn arrival_frequency() {
    let mut r = rng(1);
    let n = 100_000;
    let ones = (0..n).filter(|_| sample_arrival(&mut r, &[0.3, 0.7]).unwrap() == 1).count();
    let f = ones as f64 / n as f64;
    assert!((f - 0.7).abs() < 0.01, "{f}");
}

#[test]
fn malformed_arrival_vector() {
    let mut r = rng(1);
    assert!(matches!(sample_arrival(&mut r, &[0.0, 0.0]), Err(Error::MalformedProbabilities(_))));
}

#[test]
fn gap_instance_mean_outcomes() {
    let inst = gap_instance(8).unwrap();
    let m = inst.mean_outcomes_for_type(0).unwrap();
    assert_eq!(m, vec![(vec![0.0], vec![0.0]), (vec![0.75], vec![4.0]), (vec![1.0], vec![8.0])]);
    for (w, v) in inst.mean_outcomes_for_type(inst.null_type()).unwrap() {
        assert_eq!((w, v), (vec![0.0], vec![0.0]));
    }
}

#[test]
fn gap_instance_k2_sample() {
    let inst = gap_instance(8).unwrap();
    let o = inst.sample_outcome(0, 2, &mut rng(3)).unwrap();
    assert_eq!((o.rewards, o.allocs, o.durations), (vec![1.0], vec![1.0], vec![8]));
}

#[test]
fn volume_factorizes_for_independent_a_and_d() {
    // A in {1, 2} and D in {2, 4} independent on resource 0; resource 1 deterministic.
    let mut support = Vec::new();
    for (a, pa) in [(1.0, 0.25), (2.0, 0.75)] {
        for (d, pd) in [(2, 0.5), (4, 0.5)] {
            support.push(SupportPoint {
                prob: pa * pd,
                w: vec![1.0],
                a: vec![a, 1.0],
                d: vec![d, 3],
            });
        }
    }
    let inst = build_instance(&TableSpec {
        n_rewards: 1,
        n_resources: 2,
        n_types: 2,
        n_actions: 2,
        capacities: vec![10.0, 10.0],
        arrival_probs: vec![1.0, 0.0],
        null_type: Some(1),
        null_action: Some(0),
        horizon_hint: None,
        outcomes: vec![OutcomeEntry {
            type_index: 0,
            action: 1,
            support,
        }],
    })
    .unwrap();
    let m = inst.means(0, 1).unwrap();
    assert!((m.v[0] - m.a[0] * m.d[0]).abs() < 1e-12);
    assert!((m.v[0] - 1.75 * 3.0).abs() < 1e-12);
    assert_eq!(m.v[1], 3.0);
}

#[test]
fn bounds_examples() {
    let b = Bounds::new(
        SupportBounds {
            w_max: 1.0,
            a_max: 1.0,
            d_max: 4,
            v_max: 4.0,
        },
        20.0,
        1,
    );
    assert_eq!(b.gamma, 4.0);
    assert_eq!(b.xi, 0.05);
    assert!((b.assumption_value - 0.05 * 20f64.ln()).abs() < 1e-15);
    assert!((b.assumption_value - 0.1498).abs() < 1e-4);
    assert!(b.assumption_holds);

    let v = Bounds::new(
        SupportBounds {
            w_max: 1.0,
            a_max: 1.0,
            d_max: 1,
            v_max: 1.0,
        },
        1.0,
        8,
    );
    assert_eq!(v.xi, 1.0);
    assert!((v.assumption_value - 8f64.ln()).abs() < 1e-15);
    assert!(!v.assumption_holds);
}

#[test]
fn assumption_violation_does_not_block_construction() {
    let inst = gap_instance(2).unwrap();
    assert_eq!(inst.bounds().xi, 1.0);
    assert!(inst.bounds().assumption_holds);
    let tight = random_table(4, 2, 2, 8, 2).with_capacities(vec![2.0; 8]).unwrap();
    assert!(!tight.bounds().assumption_holds);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn null_outcomes_are_zero(seed in 0u64..1000, k in 0usize..4, s in 0u64..1000) {
        let inst = random_table(seed, 3, 3, 2, 4);
        let mut r = rng(s);
        prop_assert!(inst.sample_outcome(inst.null_type(), k, &mut r).unwrap().is_zero());
        for j in 0..inst.n_types() {
            prop_assert!(inst.sample_outcome(j, inst.null_action(), &mut r).unwrap().is_zero());
        }
    }

    #[test]
    fn bounds_recompute_exactly(seed in 0u64..1000) {
        let inst = random_table(seed, 3, 3, 2, 4);
        let b = inst.bounds();
        prop_assert_eq!(b.gamma, b.w_max.max(b.v_max));
        let c_min = inst.capacities().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(b.xi, b.a_max / c_min);
    }
}

#[test]
fn sample_means_match_declared_means() {
    let inst = random_table(17, 2, 2, 2, 4);
    let n = 100_000;
    let w_max = inst.bounds().w_max;
    let ad_max = inst.bounds().a_max * inst.bounds().d_max as f64;
    let mut r = rng(5);
    for j in 0..2 {
        for k in 1..3 {
            let m = inst.means(j, k).unwrap();
            let mut w = [0.0; 2];
            let mut v = [0.0; 2];
            for _ in 0..n {
                let o = inst.sample_outcome(j, k, &mut r).unwrap();
                for i in 0..2 {
                    w[i] += o.rewards[i];
                    v[i] += o.allocs[i] * o.durations[i] as f64;
                }
            }
            for i in 0..2 {
                let tol_w = 3.0 * w_max / (n as f64).sqrt();
                let tol_v = 3.0 * ad_max / (n as f64).sqrt();
                assert!((w[i] / n as f64 - m.w[i]).abs() <= tol_w, "w ({j},{k},{i})");
                assert!((v[i] / n as f64 - m.v[i]).abs() <= tol_v, "v ({j},{k},{i})");
            }
        }
    }
}
