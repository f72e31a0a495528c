//! Discrete-time loss system: one arrival per step, one action per arrival,
//! and a ledger that releases each allocated unit after its duration.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{ArrivalSampler, Bounds, Dims, Instance, Outcome, OutcomeModel};
use crate::rng::{stream, Stream};

/// Units in use per resource and the schedule on which they come back.
///
/// An allocation made at step `t` with duration `D` occupies steps
/// `t..t+D-1` and is released at the start of `t+D`.
#[derive(Clone, Debug)]
pub struct OccupancyLedger {
    capacities: Vec<f64>,
    occupied: Vec<f64>,
    releases: Vec<BTreeMap<usize, f64>>,
    t: usize,
}

impl OccupancyLedger {
    pub fn new(capacities: &[f64]) -> Self {
        Self {
            capacities: capacities.to_vec(),
            occupied: vec![0.0; capacities.len()],
            releases: vec![BTreeMap::new(); capacities.len()],
            t: 1,
        }
    }

    /// Current step, starting at 1.
    pub fn now(&self) -> usize {
        self.t
    }

    pub fn occupied(&self, i: usize) -> f64 {
        self.occupied[i]
    }

    pub fn occupied_all(&self) -> &[f64] {
        &self.occupied
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    /// True when every resource has at least `a_max` free units
    /// (`occupied <= c - a_max`, inclusive).
    pub fn gate(&self, a_max: f64) -> bool {
        self.occupied
            .iter()
            .zip(&self.capacities)
            .all(|(&o, &c)| o <= c - a_max)
    }

    /// Commits an outcome at the current step. Fails, leaving the ledger
    /// untouched, if any resource would exceed its capacity.
    pub fn allocate(&mut self, allocs: &[f64], durations: &[u32]) -> Result<()> {
        for (i, (&a, &d)) in allocs.iter().zip(durations).enumerate() {
            if a > 0.0 && d > 0 && self.occupied[i] + a > self.capacities[i] {
                return Err(Error::ConstraintViolation {
                    t: self.t,
                    resource: i,
                    occupied: self.occupied[i] + a,
                    capacity: self.capacities[i],
                });
            }
        }
        for (i, (&a, &d)) in allocs.iter().zip(durations).enumerate() {
            if a > 0.0 && d > 0 {
                self.occupied[i] += a;
                *self.releases[i].entry(self.t + d as usize).or_insert(0.0) += a;
            }
        }
        Ok(())
    }

    /// Moves to the next step and releases whatever is due then.
    pub fn advance(&mut self) {
        self.t += 1;
        for i in 0..self.occupied.len() {
            if let Some(units) = self.releases[i].remove(&self.t) {
                self.occupied[i] -= units;
                if self.occupied[i].abs() < 1e-12 {
                    self.occupied[i] = 0.0;
                }
            }
        }
    }
}

/// What a policy may know up front. Deliberately excludes the arrival
/// distribution and the horizon.
#[derive(Clone, Debug)]
pub struct PolicyContext {
    pub dims: Dims,
    pub capacities: Vec<f64>,
    pub bounds: Bounds,
    pub null_type: usize,
    pub null_action: usize,
    pub model: Arc<dyn OutcomeModel>,
}

impl PolicyContext {
    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            dims: inst.dims(),
            capacities: inst.capacities().to_vec(),
            bounds: *inst.bounds(),
            null_type: inst.null_type(),
            null_action: inst.null_action(),
            model: inst.model().clone(),
        }
    }

    /// `(w_jk, v_jk)` for every action, as revealed on arrival of type `j`.
    pub fn mean_outcomes(&self, j: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..self.dims.n_actions)
            .map(|k| {
                let m = self.model.means(j, k);
                (m.w, m.v)
            })
            .collect()
    }
}

/// A non-anticipatory policy. The simulator calls `next_action` once per
/// step with the arrival's type, applies the feasibility gate to the
/// proposal, and reports back the action actually taken and its outcome.
pub trait Policy {
    fn name(&self) -> &str;

    fn next_action(&mut self, t: usize, j: usize, rng: &mut dyn RngCore) -> Result<usize>;

    fn observe(&mut self, _t: usize, _j: usize, _action: usize, _outcome: &Outcome) {}

    /// Largest duality gap among the programs the policy solved, if any.
    fn lp_duality_gap(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GateMode {
    #[default]
    Enforce,
    /// Test hook: proposals reach the ledger unchecked.
    Bypass,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EpisodeOptions {
    pub gate: GateMode,
}

/// Per-step record of an episode. Steps are 1-based in accessors.
#[derive(Clone, Debug)]
pub struct Trajectory {
    n_rewards: usize,
    n_resources: usize,
    capacities: Vec<f64>,
    pub arrivals: Vec<usize>,
    pub proposed: Vec<usize>,
    pub actions: Vec<usize>,
    pub outcomes: Vec<Outcome>,
    occupied: Vec<f64>,
    cum_rewards: Vec<f64>,
}

impl Trajectory {
    fn new(n_rewards: usize, capacities: &[f64], horizon: usize) -> Self {
        Self {
            n_rewards,
            n_resources: capacities.len(),
            capacities: capacities.to_vec(),
            arrivals: Vec::with_capacity(horizon),
            proposed: Vec::with_capacity(horizon),
            actions: Vec::with_capacity(horizon),
            outcomes: Vec::with_capacity(horizon),
            occupied: Vec::with_capacity(horizon * capacities.len()),
            cum_rewards: Vec::with_capacity(horizon * n_rewards),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn n_rewards(&self) -> usize {
        self.n_rewards
    }

    pub fn n_resources(&self) -> usize {
        self.n_resources
    }

    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }

    /// Occupancy at step `t` after that step's allocation.
    pub fn occupied(&self, t: usize) -> &[f64] {
        &self.occupied[(t - 1) * self.n_resources..t * self.n_resources]
    }

    pub fn cum_rewards(&self, t: usize) -> &[f64] {
        &self.cum_rewards[(t - 1) * self.n_rewards..t * self.n_rewards]
    }

    pub fn final_rewards(&self) -> Vec<f64> {
        if self.is_empty() {
            vec![0.0; self.n_rewards]
        } else {
            self.cum_rewards(self.len()).to_vec()
        }
    }

    /// Number of `(t, i)` with `occupied_i(t) > c_i`, compared exactly.
    pub fn violations(&self) -> usize {
        (1..=self.len())
            .map(|t| {
                self.occupied(t)
                    .iter()
                    .zip(&self.capacities)
                    .filter(|(o, c)| o > c)
                    .count()
            })
            .sum()
    }

    /// Rebuilds the occupancy series from the recorded outcomes with a fresh ledger.
    pub fn replay_occupancy(&self) -> Result<Vec<f64>> {
        let mut ledger = OccupancyLedger::new(&self.capacities);
        let mut out = Vec::with_capacity(self.occupied.len());
        for (t, o) in self.outcomes.iter().enumerate() {
            if t > 0 {
                ledger.advance();
            }
            ledger.allocate(&o.allocs, &o.durations)?;
            out.extend_from_slice(ledger.occupied_all());
        }
        Ok(out)
    }

    pub fn occupied_series(&self) -> &[f64] {
        &self.occupied
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "arrival_type".into(), "action".into()];
        h.extend((1..=self.n_rewards).map(|i| format!("W_{i}")));
        h.extend((1..=self.n_resources).map(|i| format!("occupied_{i}")));
        h.extend((1..=self.n_rewards).map(|i| format!("cum_W_{i}")));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header()).map_err(csv_err)?;
        for t in 1..=self.len() {
            let mut rec = vec![
                t.to_string(),
                self.arrivals[t - 1].to_string(),
                self.actions[t - 1].to_string(),
            ];
            rec.extend(self.outcomes[t - 1].rewards.iter().map(|x| x.to_string()));
            rec.extend(self.occupied(t).iter().map(|x| x.to_string()));
            rec.extend(self.cum_rewards(t).iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Runs `policy` for `horizon` steps. Arrivals, outcomes and the policy's
/// own coin flips come from separate substreams of `seed`.
pub fn run_episode(inst: &Instance, policy: &mut dyn Policy, horizon: usize, seed: u64) -> Result<Trajectory> {
    run_episode_with(inst, policy, horizon, seed, EpisodeOptions::default())
}

pub fn run_episode_with(
    inst: &Instance,
    policy: &mut dyn Policy,
    horizon: usize,
    seed: u64,
    opts: EpisodeOptions,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let arrivals = ArrivalSampler::new(inst.arrival_probs())?;
    let mut arrival_rng = stream(seed, Stream::Arrivals);
    let mut outcome_rng = stream(seed, Stream::Outcomes);
    let mut policy_rng = stream(seed, Stream::Policy);
    let a_max = inst.bounds().a_max;
    let null = inst.null_action();

    let mut ledger = OccupancyLedger::new(inst.capacities());
    let mut traj = Trajectory::new(inst.n_rewards(), inst.capacities(), horizon);
    let mut cum = vec![0.0; inst.n_rewards()];
    for t in 1..=horizon {
        if t > 1 {
            ledger.advance();
        }
        let j = arrivals.sample(&mut arrival_rng);
        let proposed = policy.next_action(t, j, &mut policy_rng)?;
        if proposed >= inst.n_actions() {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: proposed,
                len: inst.n_actions(),
            });
        }
        let k = match opts.gate {
            GateMode::Enforce if proposed != null && !ledger.gate(a_max) => null,
            _ => proposed,
        };
        let outcome = inst.sample_outcome(j, k, &mut outcome_rng)?;
        ledger.allocate(&outcome.allocs, &outcome.durations)?;
        for (c, w) in cum.iter_mut().zip(&outcome.rewards) {
            *c += w;
        }
        policy.observe(t, j, k, &outcome);

        traj.arrivals.push(j);
        traj.proposed.push(proposed);
        traj.actions.push(k);
        traj.occupied.extend_from_slice(ledger.occupied_all());
        traj.cum_rewards.extend_from_slice(&cum);
        traj.outcomes.push(outcome);
    }
    Ok(traj)
}
