//! Allocation policies: iterated MWU, the offline static benchmark policy,
//! and two trivial baselines.

use std::ops::Range;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{empirical_distribution, solve_lp_s, SteadyState};
use crate::model::{Bounds, Instance};
use crate::mwu::{virtual_mwu, WeightVector};
use crate::simulator::{Policy, PolicyContext};

/// Doubling phases. Phase `-1` is steps `1..=d_max`; phase `q >= 0` is
/// steps `end(q-1)+1 ..= end(q)` with `end(q) = d_max * 2^(q+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseSchedule {
    d_max: usize,
}

impl PhaseSchedule {
    pub fn new(d_max: u32) -> Self {
        Self {
            d_max: d_max.max(1) as usize,
        }
    }

    /// Cumulative last step of phase `q >= -1`.
    pub fn end(&self, q: i32) -> usize {
        assert!(q >= -1, "phase index below -1");
        self.d_max << (q + 1) as u32
    }

    pub fn first_step(&self, q: i32) -> usize {
        if q == -1 {
            1
        } else {
            self.end(q - 1) + 1
        }
    }

    pub fn len(&self, q: i32) -> usize {
        self.end(q) - self.first_step(q) + 1
    }

    pub fn phase_of(&self, t: usize) -> i32 {
        let mut q = -1;
        while self.end(q) < t {
            q += 1;
        }
        q
    }
}

/// Error and discount parameters for a phase whose predecessor ends at `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorParams {
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_c: f64,
    pub eps_d: f64,
    pub eps_d_bar: f64,
    pub eta: f64,
}

impl ErrorParams {
    pub fn new(tau: f64, delta: f64, bounds: &Bounds, n_rewards: usize, n_resources: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidDelta(delta));
        }
        let (nr, nc) = (n_rewards as f64, n_resources as f64);
        let g = bounds.gamma;
        let lc = (nc / delta).ln().max(0.0);
        let ct = bounds.c_min * tau;
        let eps_a = 2.0 * (2.0 * g / ct * lc).sqrt() + 4.0 * g / ct * lc;
        let eps_b = 2.0 * bounds.w_max * ((nr / delta).ln().max(0.0) / tau).sqrt();
        let l1 = (1.0 / delta).ln();
        let eps_c = (2.0 * bounds.w_max * ((2.0 * l1 / tau).sqrt() + 2.0 * l1 / tau)).min(bounds.w_max);
        let eps_d = 8.0 * g * (((nr + nc) / delta).ln() / tau).sqrt();
        Ok(Self {
            eps_a,
            eps_b,
            eps_c,
            eps_d,
            eps_d_bar: eps_d / bounds.c_min,
            eta: discount(bounds, n_resources),
        })
    }

    /// Probability that the oracle's action survives thinning.
    pub fn accept_prob(&self) -> f64 {
        1.0 / (1.0 + self.eps_d_bar + self.eta)
    }
}

/// `sqrt(xi ln(|I_c| / xi))`, floored at zero.
pub fn discount(bounds: &Bounds, n_resources: usize) -> f64 {
    if n_resources == 0 {
        return 0.0;
    }
    (bounds.xi * (n_resources as f64 / bounds.xi).ln()).max(0.0).sqrt()
}

/// Optimum of the steady-state program under the empirical distribution of `window`.
pub fn estimate_lambda_hat(ctx: &PolicyContext, window: &[usize]) -> Result<f64> {
    Ok(solve_lambda_hat(ctx, window)?.lambda)
}

fn solve_lambda_hat(ctx: &PolicyContext, window: &[usize]) -> Result<SteadyState> {
    let p_hat = empirical_distribution(window, ctx.dims.n_types)?;
    solve_lp_s(ctx.model.as_ref(), &p_hat, &ctx.capacities)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImwuConfig {
    pub delta: f64,
    /// Test hook replacing `1 / (1 + eps_d_bar + eta)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept_prob_override: Option<f64>,
}

impl Default for ImwuConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            accept_prob_override: None,
        }
    }
}

/// What was prepared at the start of a phase; windows index the arrival
/// history from 0.
#[derive(Clone, Debug)]
pub struct PhaseRecord {
    pub q: i32,
    pub first_step: usize,
    pub mwu_window: Range<usize>,
    pub lambda_window: Range<usize>,
    pub lambda_hat: f64,
    pub lambda_duality_gap: f64,
    pub params: ErrorParams,
    pub accept_prob: f64,
    pub theta_len: usize,
}

#[derive(Debug)]
pub struct ImwuPolicy {
    ctx: PolicyContext,
    cfg: ImwuConfig,
    schedule: PhaseSchedule,
    warmup_action: usize,
    history: Vec<usize>,
    phase: i32,
    theta: Vec<WeightVector>,
    accept_prob: f64,
    records: Vec<PhaseRecord>,
}

impl ImwuPolicy {
    pub fn new(ctx: PolicyContext, cfg: ImwuConfig) -> Result<Self> {
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::InvalidDelta(cfg.delta));
        }
        if let Some(p) = cfg.accept_prob_override {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("acceptance probability {p} outside [0, 1]")));
            }
        }
        let warmup_action = (0..ctx.dims.n_actions)
            .find(|&k| k != ctx.null_action)
            .unwrap_or(ctx.null_action);
        Ok(Self {
            schedule: PhaseSchedule::new(ctx.bounds.d_max),
            ctx,
            cfg,
            warmup_action,
            history: Vec::new(),
            phase: -1,
            theta: Vec::new(),
            accept_prob: 1.0,
            records: Vec::new(),
        })
    }

    pub fn schedule(&self) -> PhaseSchedule {
        self.schedule
    }

    pub fn phases(&self) -> &[PhaseRecord] {
        &self.records
    }

    pub fn theta(&self) -> &[WeightVector] {
        &self.theta
    }

    pub fn context(&self) -> &PolicyContext {
        &self.ctx
    }

    fn start_phase(&mut self, q: i32) -> Result<()> {
        let tau = self.schedule.end(q - 1);
        if self.history.len() < tau {
            return Err(Error::PhaseNotInitialized);
        }
        let half = tau / 2;
        let mwu_window = 0..half;
        let lambda_window = half..tau;
        debug_assert!(mwu_window.end <= lambda_window.start);

        let ss = solve_lambda_hat(&self.ctx, &self.history[lambda_window.clone()])?;
        let lambda_hat = ss.lambda;
        let params = ErrorParams::new(
            tau as f64,
            self.cfg.delta,
            &self.ctx.bounds,
            self.ctx.dims.n_rewards,
            self.ctx.dims.n_resources,
        )?;
        let theta = if half == 0 {
            vec![WeightVector::uniform(self.ctx.dims.n_rewards, self.ctx.dims.n_resources)]
        } else {
            let model = self.ctx.model.as_ref();
            virtual_mwu(
                model,
                &self.history[mwu_window.clone()],
                lambda_hat - params.eps_c,
                &self.ctx.capacities,
                &self.ctx.bounds,
                |j, wv| model.kappa(j, &wv.phi, &wv.psi),
            )?
        };
        self.accept_prob = self.cfg.accept_prob_override.unwrap_or_else(|| params.accept_prob());
        self.records.push(PhaseRecord {
            q,
            first_step: self.schedule.first_step(q),
            mwu_window,
            lambda_window,
            lambda_hat,
            lambda_duality_gap: ss.duality_gap,
            params,
            accept_prob: self.accept_prob,
            theta_len: theta.len(),
        });
        self.theta = theta;
        self.phase = q;
        Ok(())
    }
}

impl Policy for ImwuPolicy {
    fn name(&self) -> &str {
        "imwu"
    }

    fn lp_duality_gap(&self) -> Option<f64> {
        self.records.iter().map(|r| r.lambda_duality_gap).reduce(f64::max)
    }

    fn next_action(&mut self, t: usize, j: usize, rng: &mut dyn RngCore) -> Result<usize> {
        if t != self.history.len() + 1 {
            return Err(Error::Config(format!("step {t} out of sequence")));
        }
        let q = self.schedule.phase_of(t);
        if q == -1 {
            self.history.push(j);
            return Ok(self.warmup_action);
        }
        if q != self.phase {
            self.start_phase(q)?;
        }
        self.history.push(j);
        if self.theta.is_empty() {
            return Err(Error::PhaseNotInitialized);
        }
        let wv = &self.theta[rng.random_range(0..self.theta.len())];
        let k = self.ctx.model.kappa(j, &wv.phi, &wv.psi)?;
        if rng.random::<f64>() < self.accept_prob {
            Ok(k)
        } else {
            Ok(self.ctx.null_action)
        }
    }
}

/// Randomizes according to a fixed steady-state allocation, scaled by `1 / (1 + eta_bar)`.
#[derive(Debug)]
pub struct OsaPolicy {
    allocation: Vec<Vec<(usize, f64)>>,
    eta_bar: f64,
    null_action: usize,
}

impl OsaPolicy {
    pub fn new(allocation: Vec<Vec<(usize, f64)>>, eta_bar: f64, null_action: usize) -> Result<Self> {
        if !(eta_bar >= 0.0 && eta_bar.is_finite()) {
            return Err(Error::Config(format!("eta_bar must be nonnegative, got {eta_bar}")));
        }
        Ok(Self {
            allocation,
            eta_bar,
            null_action,
        })
    }

    /// Solves the steady-state program with the true arrival distribution.
    /// `eta_bar` defaults to `sqrt(xi)`.
    pub fn for_instance(inst: &Instance, eta_bar: Option<f64>) -> Result<Self> {
        let ss = solve_lp_s(inst.model().as_ref(), inst.arrival_probs(), inst.capacities())?;
        let eta_bar = eta_bar.unwrap_or_else(|| inst.bounds().xi.sqrt());
        Self::new(ss.allocation, eta_bar, inst.null_action())
    }

    pub fn eta_bar(&self) -> f64 {
        self.eta_bar
    }
}

impl Policy for OsaPolicy {
    fn name(&self) -> &str {
        "osa"
    }

    fn next_action(&mut self, _t: usize, j: usize, rng: &mut dyn RngCore) -> Result<usize> {
        let u = rng.random::<f64>() * (1.0 + self.eta_bar);
        let mut acc = 0.0;
        for &(k, y) in self.allocation.get(j).map_or(&[][..], Vec::as_slice) {
            acc += y;
            if u < acc {
                return Ok(k);
            }
        }
        Ok(self.null_action)
    }
}

#[derive(Debug)]
pub struct NullPolicy {
    null_action: usize,
}

impl NullPolicy {
    pub fn new(null_action: usize) -> Self {
        Self { null_action }
    }
}

impl Policy for NullPolicy {
    fn name(&self) -> &str {
        "null"
    }

    fn next_action(&mut self, _t: usize, _j: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.null_action)
    }
}

/// Proposes the action with the largest total mean reward.
#[derive(Debug)]
pub struct GreedyPolicy {
    ctx: PolicyContext,
    ones: Vec<f64>,
    zeros: Vec<f64>,
}

impl GreedyPolicy {
    pub fn new(ctx: PolicyContext) -> Self {
        Self {
            ones: vec![1.0; ctx.dims.n_rewards],
            zeros: vec![0.0; ctx.dims.n_resources],
            ctx,
        }
    }
}

impl Policy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn next_action(&mut self, _t: usize, j: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        self.ctx.model.kappa(j, &self.ones, &self.zeros)
    }
}

/// Always proposes the same action.
#[derive(Debug)]
pub struct FixedActionPolicy(pub usize);

impl Policy for FixedActionPolicy {
    fn name(&self) -> &str {
        "fixed"
    }

    fn next_action(&mut self, _t: usize, _j: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.0)
    }
}

/// Policy selection as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Imwu {
        #[serde(default = "default_delta")]
        delta: f64,
    },
    Osa {
        #[serde(default)]
        eta_bar: Option<f64>,
    },
    Null,
    Greedy,
}

fn default_delta() -> f64 {
    0.1
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Imwu { .. } => "imwu",
            PolicySpec::Osa { .. } => "osa",
            PolicySpec::Null => "null",
            PolicySpec::Greedy => "greedy",
        }
    }

    pub fn parse_name(name: &str) -> Result<Self> {
        match name {
            "imwu" => Ok(PolicySpec::Imwu { delta: default_delta() }),
            "osa" => Ok(PolicySpec::Osa { eta_bar: None }),
            "null" => Ok(PolicySpec::Null),
            "greedy" => Ok(PolicySpec::Greedy),
            other => Err(Error::Config(format!("unknown policy {other}"))),
        }
    }

    /// Only the OSA branch reads the arrival distribution.
    pub fn build(&self, inst: &Instance) -> Result<Box<dyn Policy>> {
        Ok(match *self {
            PolicySpec::Imwu { delta } => Box::new(ImwuPolicy::new(
                PolicyContext::from_instance(inst),
                ImwuConfig {
                    delta,
                    accept_prob_override: None,
                },
            )?),
            PolicySpec::Osa { eta_bar } => Box::new(OsaPolicy::for_instance(inst, eta_bar)?),
            PolicySpec::Null => Box::new(NullPolicy::new(inst.null_action())),
            PolicySpec::Greedy => Box::new(GreedyPolicy::new(PolicyContext::from_instance(inst))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_arithmetic() {
        let s = PhaseSchedule::new(4);
        assert_eq!((s.first_step(-1), s.end(-1)), (1, 4));
        assert_eq!((s.first_step(0), s.end(0)), (5, 8));
        assert_eq!((s.first_step(1), s.end(1)), (9, 16));
        assert_eq!(s.phase_of(4), -1);
        assert_eq!(s.phase_of(5), 0);
        assert_eq!(s.phase_of(16), 1);
        assert_eq!(s.phase_of(17), 2);
    }

    #[test]
    fn policy_spec_names() {
        for n in ["imwu", "osa", "null", "greedy"] {
            assert_eq!(PolicySpec::parse_name(n).unwrap().label(), n);
        }
        assert!(PolicySpec::parse_name("random").is_err());
    }
}
