use proptest::prelude::*;
use rand::{Rng, RngCore};
use reusealloc::model::gap_instance;
use reusealloc::policy::{FixedActionPolicy, NullPolicy};
use reusealloc::simulator::{run_episode, run_episode_with, EpisodeOptions, GateMode, OccupancyLedger, Policy};
use reusealloc::suite::random_table;
use reusealloc::Error;

fn series(ledger: &mut OccupancyLedger, steps: usize) -> Vec<f64> {
    let mut out = vec![ledger.occupied(0)];
    for _ in 1..steps {
        ledger.advance();
        out.push(ledger.occupied(0));
    }
    out
}

#[test]
fn occupancy_of_one_allocation() {
    let mut l = OccupancyLedger::new(&[4.0]);
    l.allocate(&[2.0], &[3]).unwrap();
    assert_eq!(series(&mut l, 4), vec![2.0, 2.0, 2.0, 0.0]);
}

#[test]
fn empty_ledger_is_empty() {
    let l = OccupancyLedger::new(&[4.0, 2.0]);
    assert_eq!(l.occupied_all(), &[0.0, 0.0]);
    assert!(l.gate(1.0));
}

#[test]
fn back_to_back_unit_allocations() {
    let mut l = OccupancyLedger::new(&[1.0]);
    l.allocate(&[1.0], &[1]).unwrap();
    let first = l.occupied(0);
    l.advance();
    l.allocate(&[1.0], &[1]).unwrap();
    let second = l.occupied(0);
    l.advance();
    assert_eq!((first, second, l.occupied(0)), (1.0, 1.0, 0.0));
}

#[test]
fn gate_threshold_is_inclusive() {
    let mut l = OccupancyLedger::new(&[4.0]);
    l.allocate(&[3.0], &[5]).unwrap();
    assert!(l.gate(1.0));
    let mut m = OccupancyLedger::new(&[4.0]);
    m.allocate(&[3.5], &[5]).unwrap();
    assert!(!m.gate(1.0));
}

struct Script(Vec<usize>);

impl Policy for Script {
    fn name(&self) -> &str {
        "script"
    }
    fn next_action(&mut self, t: usize, _j: usize, _rng: &mut dyn RngCore) -> reusealloc::Result<usize> {
        Ok(self.0.get(t - 1).copied().unwrap_or(0))
    }
}

#[test]
fn long_action_occupies_for_its_duration() {
    let inst = gap_instance(8).unwrap();
    let traj = run_episode(&inst, &mut Script(vec![2]), 10, 0).unwrap();
    let occ: Vec<f64> = (1..=10).map(|t| traj.occupied(t)[0]).collect();
    assert_eq!(occ, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
}

#[test]
fn null_action_leaves_everything_at_zero() {
    let inst = random_table(2, 3, 3, 2, 4);
    let traj = run_episode(&inst, &mut NullPolicy::new(0), 50, 1).unwrap();
    assert!(traj.outcomes.iter().all(|o| o.is_zero()));
    assert!(traj.occupied_series().iter().all(|&x| x == 0.0));
    assert_eq!(traj.final_rewards(), vec![0.0, 0.0]);
}

// With c = 4 and a_max = 1 the gate admits occupied <= 3, so the fourth
// unit is still accepted at t = 4.
#[test]
fn gated_long_action_on_gap_instance() {
    let inst = gap_instance(8).unwrap();
    let traj = run_episode(&inst, &mut FixedActionPolicy(2), 4, 0).unwrap();
    assert_eq!(traj.actions, vec![2, 2, 2, 2]);
    assert_eq!(traj.final_rewards(), vec![4.0]);
    assert_eq!(traj.occupied(4), &[4.0]);

    let traj = run_episode(&inst, &mut FixedActionPolicy(2), 5, 0).unwrap();
    assert_eq!(traj.actions[4], 0);
    assert_eq!(traj.proposed[4], 2);
    assert_eq!(traj.final_rewards(), vec![4.0]);
}

#[test]
fn gated_short_action_on_gap_instance() {
    let inst = gap_instance(8).unwrap();
    let traj = run_episode(&inst, &mut FixedActionPolicy(1), 4, 0).unwrap();
    let occ: Vec<f64> = (1..=4).map(|t| traj.occupied(t)[0]).collect();
    assert_eq!(occ, vec![1.0, 2.0, 3.0, 4.0]);
    assert_eq!(traj.final_rewards(), vec![3.0]);

    // k_1 units come back after 4 steps, so the pattern repeats.
    let traj = run_episode(&inst, &mut FixedActionPolicy(1), 12, 0).unwrap();
    assert!(traj.actions.iter().all(|&k| k == 1));
    assert_eq!(traj.violations(), 0);
}

#[test]
fn bypass_surfaces_constraint_violation() {
    let inst = gap_instance(8).unwrap();
    let opts = EpisodeOptions { gate: GateMode::Bypass };
    let err = run_episode_with(&inst, &mut FixedActionPolicy(2), 5, 0, opts).unwrap_err();
    match err {
        Error::ConstraintViolation { t, occupied, capacity, .. } => {
            assert_eq!((t, occupied, capacity), (5, 5.0, 4.0));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_horizon_and_bad_action() {
    let inst = gap_instance(8).unwrap();
    assert!(matches!(run_episode(&inst, &mut NullPolicy::new(0), 0, 0), Err(Error::Config(_))));
    assert!(matches!(
        run_episode(&inst, &mut FixedActionPolicy(7), 3, 0),
        Err(Error::IndexOutOfRange { what: "action", .. })
    ));
}

#[test]
fn trajectory_csv_layout() {
    let inst = random_table(3, 2, 2, 2, 3);
    let traj = run_episode(&inst, &mut FixedActionPolicy(1), 6, 2).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,arrival_type,action,W_1,W_2,occupied_1,occupied_2,cum_W_1,cum_W_2"
    );
    assert_eq!(lines.count(), 6);
}

struct Coin(usize);

impl Policy for Coin {
    fn name(&self) -> &str {
        "coin"
    }
    fn next_action(&mut self, _t: usize, _j: usize, rng: &mut dyn RngCore) -> reusealloc::Result<usize> {
        Ok(rng.random_range(0..self.0))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn episode_invariants(inst_seed in 0u64..500, seed in 0u64..500, horizon in 1usize..120) {
        let inst = random_table(inst_seed, 3, 3, 2, 5);
        let traj = run_episode(&inst, &mut Coin(inst.n_actions()), horizon, seed).unwrap();
        prop_assert_eq!(traj.len(), horizon);
        prop_assert!(traj.actions.iter().all(|&k| k < inst.n_actions()));
        prop_assert_eq!(traj.violations(), 0);
        for t in 1..=horizon {
            for (o, c) in traj.occupied(t).iter().zip(inst.capacities()) {
                prop_assert!(o <= c);
            }
        }
        prop_assert_eq!(traj.replay_occupancy().unwrap(), traj.occupied_series().to_vec());
        let mut cum = [0.0f64; 2];
        for (t, o) in traj.outcomes.iter().enumerate() {
            for i in 0..2 {
                cum[i] += o.rewards[i];
                prop_assert!((traj.cum_rewards(t + 1)[i] - cum[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn episodes_are_deterministic(seed in 0u64..1000) {
        let inst = random_table(9, 3, 3, 2, 5);
        let a = run_episode(&inst, &mut Coin(inst.n_actions()), 60, seed).unwrap();
        let b = run_episode(&inst, &mut Coin(inst.n_actions()), 60, seed).unwrap();
        prop_assert_eq!(&a.actions, &b.actions);
        prop_assert_eq!(a.occupied_series(), b.occupied_series());
    }
}
