use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reusealloc::model::{build_instance, gap_instance, Instance, OutcomeEntry, SupportPoint, TableSpec};
use reusealloc::mwu::{
    learning_rate, mwu_regret_harness, softmax, virtual_mwu, virtual_mwu_traced, write_trace_csv, MwuState,
};
use reusealloc::suite::random_table;
use reusealloc::Error;

fn one_action(w: f64, a: f64, d: u32, c: f64) -> Instance {
    build_instance(&TableSpec {
        n_rewards: 1,
        n_resources: 1,
        n_types: 2,
        n_actions: 2,
        capacities: vec![c],
        arrival_probs: vec![1.0, 0.0],
        null_type: Some(1),
        null_action: Some(0),
        horizon_hint: None,
        outcomes: vec![OutcomeEntry {
            type_index: 0,
            action: 1,
            support: vec![SupportPoint {
                prob: 1.0,
                w: vec![w],
                a: vec![a],
                d: vec![d],
            }],
        }],
    })
    .unwrap()
}

#[test]
fn kappa_ties_go_to_null() {
    let inst = one_action(0.0, 1.0, 2, 4.0);
    assert_eq!(inst.kappa(0, &[1.0], &[0.0]).unwrap(), 0);
}

#[test]
fn kappa_on_gap_instance() {
    let inst = gap_instance(8).unwrap();
    assert_eq!(inst.kappa(0, &[1.0], &[0.0]).unwrap(), 2);
    assert_eq!(inst.kappa(0, &[0.0], &[1.0]).unwrap(), 0);
}

#[test]
fn learning_rate_examples() {
    assert!((learning_rate(1, 1.0, 4) - 1.17741).abs() < 1e-5);
    assert!((learning_rate(12, 1.0, 4) / learning_rate(3, 1.0, 4) - 0.5).abs() < 1e-15);
    assert!((learning_rate(5, 2.0, 4) / learning_rate(5, 1.0, 4) - 0.5).abs() < 1e-15);
}

#[test]
fn first_virtual_weights_are_uniform() {
    let inst = random_table(5, 3, 3, 2, 4);
    let theta = virtual_mwu(inst.model().as_ref(), &[0, 1], 0.2, inst.capacities(), inst.bounds(), |j, wv| {
        inst.kappa(j, &wv.phi, &wv.psi)
    })
    .unwrap();
    assert_eq!(theta[0].phi, vec![0.25; 2]);
    assert_eq!(theta[0].psi, vec![0.25; 2]);
}

// One reward, one resource, w = v = 1, c = 2, target 0.5. At uniform weights
// the oracle is indifferent between null and the action, so the action is
// forced to trace the update.
#[test]
fn one_update_by_hand() {
    let inst = one_action(1.0, 1.0, 1, 2.0);
    let b = inst.bounds();
    assert_eq!((b.gamma, b.v_max), (1.0, 1.0));
    let (theta, trace) =
        virtual_mwu_traced(inst.model().as_ref(), &[0, 0], 0.5, inst.capacities(), b, |_, _| Ok(1)).unwrap();
    assert_eq!(trace[1].gamma, vec![0.5]);
    assert_eq!(trace[1].xi, vec![0.0]);
    let eta = 2f64.ln().sqrt() / 2f64.sqrt();
    let e = (-0.5 * eta).exp();
    assert!((theta[1].phi[0] - e / (e + 1.0)).abs() < 1e-15);
    assert!((theta[1].psi[0] - 1.0 / (e + 1.0)).abs() < 1e-15);
}

#[test]
fn null_only_instance_drifts_to_rewards() {
    let inst = build_instance(&TableSpec {
        n_rewards: 2,
        n_resources: 2,
        n_types: 2,
        n_actions: 1,
        capacities: vec![3.0, 0.5],
        arrival_probs: vec![1.0, 0.0],
        null_type: Some(1),
        null_action: Some(0),
        horizon_hint: None,
        outcomes: vec![],
    })
    .unwrap();
    let target = 0.3;
    let types = vec![0; 400];
    let (theta, trace) =
        virtual_mwu_traced(inst.model().as_ref(), &types, target, inst.capacities(), inst.bounds(), |_, _| Ok(0))
            .unwrap();
    // v_max falls back to 1, so the slack terms are min(3, 1) and min(0.5, 1).
    for row in &trace {
        let n = (row.s - 1) as f64;
        for g in &row.gamma {
            assert!((g + n * target).abs() < 1e-12);
        }
        assert!((row.xi[0] - n).abs() < 1e-12);
        assert!((row.xi[1] - 0.5 * n).abs() < 1e-12);
    }
    let last = theta.last().unwrap();
    assert!(last.phi.iter().sum::<f64>() > 0.999);
    let mut buf = Vec::new();
    write_trace_csv(&trace[..2], &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("s,Gamma_1,Gamma_2,Xi_1,Xi_2,phi_1,phi_2,psi_1,psi_2\n1,"));
}

#[test]
fn empty_window_is_an_error() {
    let inst = gap_instance(8).unwrap();
    let r = virtual_mwu(inst.model().as_ref(), &[], 0.1, inst.capacities(), inst.bounds(), |_, _| Ok(0));
    assert!(matches!(r, Err(Error::EmptySampleWindow)));
}

#[test]
fn state_weights_match_softmax() {
    let mut st = MwuState::new(1, 0.5, vec![1.0], 1.0);
    st.update(&[1.0], &[1.0]);
    let direct = softmax(&[0.5], &[0.0], learning_rate(2, 1.0, 2));
    assert_eq!(st.weights(), direct);
}

#[test]
fn constant_losses_keep_uniform_weights() {
    let losses = vec![vec![0.7; 4]; 100];
    let rep = mwu_regret_harness(&losses, 1.0);
    assert!((rep.weighted_avg - 0.7).abs() < 1e-12);
    assert!(rep.coordinate_avg.iter().all(|&c| (c - 0.7).abs() < 1e-12));
}

#[test]
fn single_coordinate_is_exact() {
    let losses: Vec<Vec<f64>> = (0..50).map(|s| vec![(s as f64 * 0.37).sin()]).collect();
    let rep = mwu_regret_harness(&losses, 1.0);
    assert!((rep.weighted_avg - rep.coordinate_avg[0]).abs() < 1e-15);
}

#[test]
fn long_random_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let losses: Vec<Vec<f64>> = (0..10_000).map(|_| (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    assert!(mwu_regret_harness(&losses, 1.0).holds(0.0));
}

fn arb_losses() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
    (1usize..=8, 0.1f64..=4.0, 1usize..=300).prop_flat_map(|(n, b, tau)| {
        (prop::collection::vec(prop::collection::vec(-b..=b, n), tau), Just(b))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn regret_bound_holds((losses, b) in arb_losses()) {
        let rep = mwu_regret_harness(&losses, b);
        prop_assert!(rep.holds(1e-12), "{:?}", rep);
    }

    #[test]
    fn softmax_on_simplex_and_shift_invariant(
        g in prop::collection::vec(-50.0f64..50.0, 1..5),
        x in prop::collection::vec(-50.0f64..50.0, 0..5),
        eta in 0.0f64..3.0,
        shift in -1e3f64..1e3,
    ) {
        let a = softmax(&g, &x, eta);
        prop_assert!(a.on_simplex(1e-12));
        let gs: Vec<f64> = g.iter().map(|v| v + shift).collect();
        let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let b = softmax(&gs, &xs, eta);
        for (p, q) in a.phi.iter().chain(&a.psi).zip(b.phi.iter().chain(&b.psi)) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn kappa_ignores_positive_scaling(seed in 0u64..300, j in 0usize..3, scale in 1e-3f64..1e3) {
        let inst = random_table(seed, 3, 4, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
        let psi: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
        let k = inst.kappa(j, &phi, &psi).unwrap();
        let best = |p: &[f64], q: &[f64], kk: usize| {
            let mm = inst.means(j, kk).unwrap();
            p.iter().zip(&mm.w).map(|(a, b)| a * b).sum::<f64>() - q.iter().zip(&mm.v).map(|(a, b)| a * b).sum::<f64>()
        };
        let ps: Vec<f64> = phi.iter().map(|v| v * scale).collect();
        let qs: Vec<f64> = psi.iter().map(|v| v * scale).collect();
        let ks = inst.kappa(j, &ps, &qs).unwrap();
        // Same index unless two actions tie to rounding.
        if ks != k {
            prop_assert!((best(&ps, &qs, ks) - best(&ps, &qs, k)).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn virtual_weights_stay_on_simplex(seed in 0u64..200, len in 1usize..200) {
        let inst = random_table(seed, 3, 3, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let types: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
        let theta = virtual_mwu(inst.model().as_ref(), &types, 0.4, inst.capacities(), inst.bounds(), |j, wv| {
            inst.kappa(j, &wv.phi, &wv.psi)
        })
        .unwrap();
        prop_assert_eq!(theta.len(), len);
        for wv in &theta {
            prop_assert!(wv.on_simplex(1e-12));
        }
    }
}
