//! Multiplicative weights over reward and resource indices.
//!
//! The virtual process replays recorded arrival types against known means:
//! reward coordinates accumulate `w - target`, resource coordinates
//! accumulate `min(c, v_max) - v`, and the next weights are a softmax of the
//! negated sums at rate `sqrt(ln n) / (gamma sqrt(s))`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{Bounds, OutcomeModel};

/// A point `(phi, psi)` on the simplex over reward and resource indices.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl WeightVector {
    pub fn uniform(n_rewards: usize, n_resources: usize) -> Self {
        let u = 1.0 / (n_rewards + n_resources) as f64;
        Self {
            phi: vec![u; n_rewards],
            psi: vec![u; n_resources],
        }
    }

    pub fn total(&self) -> f64 {
        self.phi.iter().chain(&self.psi).sum()
    }

    pub fn on_simplex(&self, tol: f64) -> bool {
        self.phi.iter().chain(&self.psi).all(|&x| x >= 0.0) && (self.total() - 1.0).abs() <= tol
    }
}

pub fn learning_rate(s: usize, gamma: f64, n: usize) -> f64 {
    (n as f64).ln().sqrt() / (gamma * (s as f64).sqrt())
}

/// Softmax of `-eta * exponents`, shifted by the minimum exponent.
pub fn softmax(gamma: &[f64], xi: &[f64], eta: f64) -> WeightVector {
    let lo = gamma.iter().chain(xi).copied().fold(f64::INFINITY, f64::min);
    let e = |x: &f64| (-eta * (x - lo)).exp();
    let phi: Vec<f64> = gamma.iter().map(e).collect();
    let psi: Vec<f64> = xi.iter().map(e).collect();
    let z: f64 = phi.iter().chain(&psi).sum();
    WeightVector {
        phi: phi.into_iter().map(|x| x / z).collect(),
        psi: psi.into_iter().map(|x| x / z).collect(),
    }
}

/// Exponent sums after `s - 1` virtual steps.
#[derive(Clone, Debug)]
pub struct MwuState {
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
    pub s: usize,
    target: f64,
    slack: Vec<f64>,
    bound: f64,
}

impl MwuState {
    /// `target` is `lambda_hat - eps_c`; `slack[i]` is `min(c_i, v_max)`.
    pub fn new(n_rewards: usize, target: f64, slack: Vec<f64>, bound: f64) -> Self {
        Self {
            gamma: vec![0.0; n_rewards],
            xi: vec![0.0; slack.len()],
            s: 1,
            target,
            slack,
            bound,
        }
    }

    pub fn from_bounds(n_rewards: usize, target: f64, capacities: &[f64], bounds: &Bounds) -> Self {
        let slack = capacities.iter().map(|&c| c.min(bounds.v_max)).collect();
        Self::new(n_rewards, target, slack, bounds.gamma)
    }

    pub fn weights(&self) -> WeightVector {
        if self.s == 1 {
            return WeightVector::uniform(self.gamma.len(), self.xi.len());
        }
        let eta = learning_rate(self.s, self.bound, self.gamma.len() + self.xi.len());
        softmax(&self.gamma, &self.xi, eta)
    }

    pub fn update(&mut self, w: &[f64], v: &[f64]) {
        for (g, &w) in self.gamma.iter_mut().zip(w) {
            *g += w - self.target;
        }
        for ((x, &v), &sl) in self.xi.iter_mut().zip(v).zip(&self.slack) {
            *x += sl - v;
        }
        self.s += 1;
    }
}

/// One row of the optional per-step dump.
#[derive(Clone, Debug)]
pub struct MwuTraceRow {
    pub s: usize,
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
    pub weights: WeightVector,
}

pub fn write_trace_csv<W: Write>(rows: &[MwuTraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = rows.first() {
        let mut h = vec!["s".to_string()];
        h.extend((1..=first.gamma.len()).map(|i| format!("Gamma_{i}")));
        h.extend((1..=first.xi.len()).map(|i| format!("Xi_{i}")));
        h.extend((1..=first.gamma.len()).map(|i| format!("phi_{i}")));
        h.extend((1..=first.xi.len()).map(|i| format!("psi_{i}")));
        w.write_record(&h).map_err(crate::simulator::csv_err)?;
    }
    for r in rows {
        let mut rec = vec![r.s.to_string()];
        let nums = r.gamma.iter().chain(&r.xi).chain(&r.weights.phi).chain(&r.weights.psi);
        rec.extend(nums.map(|x| x.to_string()));
        w.write_record(&rec).map_err(crate::simulator::csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the virtual process over `types` and returns the weights in force
/// at each virtual step `s = 1..=types.len()`. `kappa(j, weights)` picks
/// the virtual action; only the types are read from history.
pub fn virtual_mwu<K>(
    model: &dyn OutcomeModel,
    types: &[usize],
    target: f64,
    capacities: &[f64],
    bounds: &Bounds,
    kappa: K,
) -> Result<Vec<WeightVector>>
where
    K: FnMut(usize, &WeightVector) -> Result<usize>,
{
    run_virtual(model, types, target, capacities, bounds, kappa, None)
}

/// As [`virtual_mwu`], also recording `(s, Gamma, Xi, phi, psi)` per step.
pub fn virtual_mwu_traced<K>(
    model: &dyn OutcomeModel,
    types: &[usize],
    target: f64,
    capacities: &[f64],
    bounds: &Bounds,
    kappa: K,
) -> Result<(Vec<WeightVector>, Vec<MwuTraceRow>)>
where
    K: FnMut(usize, &WeightVector) -> Result<usize>,
{
    let mut trace = Vec::with_capacity(types.len());
    let theta = run_virtual(model, types, target, capacities, bounds, kappa, Some(&mut trace))?;
    Ok((theta, trace))
}

fn run_virtual<K>(
    model: &dyn OutcomeModel,
    types: &[usize],
    target: f64,
    capacities: &[f64],
    bounds: &Bounds,
    mut kappa: K,
    mut trace: Option<&mut Vec<MwuTraceRow>>,
) -> Result<Vec<WeightVector>>
where
    K: FnMut(usize, &WeightVector) -> Result<usize>,
{
    if types.is_empty() {
        return Err(Error::EmptySampleWindow);
    }
    let dims = model.dims();
    let mut state = MwuState::from_bounds(dims.n_rewards, target, capacities, bounds);
    let mut theta = Vec::with_capacity(types.len());
    for &j in types {
        let wv = state.weights();
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(MwuTraceRow {
                s: state.s,
                gamma: state.gamma.clone(),
                xi: state.xi.clone(),
                weights: wv.clone(),
            });
        }
        let k = kappa(j, &wv)?;
        if k >= dims.n_actions {
            return Err(Error::OracleFailure(format!("oracle returned action {k} of {}", dims.n_actions)));
        }
        let m = model.means(j, k);
        state.update(&m.w, &m.v);
        theta.push(wv);
    }
    Ok(theta)
}

/// Both sides of the regret inequality for an arbitrary loss sequence.
#[derive(Clone, Debug)]
pub struct RegretReport {
    pub coordinate_avg: Vec<f64>,
    pub weighted_avg: f64,
    /// `2 B sqrt(ln n / tau)`.
    pub slack: f64,
}

impl RegretReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.coordinate_avg
            .iter()
            .all(|&l| l >= self.weighted_avg - self.slack - tol)
    }
}

/// Plays `theta(s) = softmax(-eta(s) * sum_{n<s} loss(n))` with
/// `eta(s) = sqrt(ln n) / (b sqrt(s))` against `losses`.
pub fn mwu_regret_harness(losses: &[Vec<f64>], b: f64) -> RegretReport {
    let n = losses.first().map_or(0, Vec::len);
    let tau = losses.len();
    let mut cum = vec![0.0; n];
    let mut weighted = 0.0;
    for (s, loss) in losses.iter().enumerate() {
        let eta = learning_rate(s + 1, b, n);
        let wv = softmax(&cum, &[], eta);
        weighted += wv.phi.iter().zip(loss).map(|(p, l)| p * l).sum::<f64>();
        for (c, l) in cum.iter_mut().zip(loss) {
            *c += l;
        }
    }
    let t = tau.max(1) as f64;
    RegretReport {
        coordinate_avg: cum.iter().map(|c| c / t).collect(),
        weighted_avg: weighted / t,
        slack: 2.0 * b * ((n as f64).ln() / t).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[1.0, -2.0], &[0.5], 0.7);
        let b = softmax(&[1001.0, 998.0], &[1000.5], 0.7);
        for (x, y) in a.phi.iter().chain(&a.psi).zip(b.phi.iter().chain(&b.psi)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn learning_rate_formula() {
        assert!((learning_rate(1, 1.0, 4) - 4f64.ln().sqrt()).abs() < 1e-15);
        assert!((learning_rate(8, 1.0, 4) * 2.0 - learning_rate(2, 1.0, 4)).abs() < 1e-15);
    }
}
