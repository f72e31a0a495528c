//! Multinomial-logit assortment planning with three KPI rewards
//! (normalized revenue and per-category sales) and one resource per product.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Cmp, LinearProgram, LpStatus, Simplex};
use crate::model::{Dims, Instance, InstanceParts, MeanOutcome, Outcome, OutcomeModel, SupportBounds};

const SUPPORT_TOL: f64 = 1e-9;
const INTEGRALITY_TOL: f64 = 1e-6;

/// Finite-support usage duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationDist {
    pub values: Vec<u32>,
    pub probs: Vec<f64>,
}

impl DurationDist {
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(&v, &p)| v as f64 * p).sum()
    }

    /// `P(Duration >= s)`.
    pub fn tail(&self, s: u32) -> f64 {
        self.values.iter().zip(&self.probs).filter(|(&v, _)| v >= s).map(|(_, &p)| p).sum()
    }

    pub fn max(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }
}

/// Serializable MNL instance. Customer types are `0..n_customers`; the null
/// type is appended as index `n_customers`. Category labels are 1 or 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnlSpec {
    pub n_products: usize,
    pub n_customers: usize,
    pub max_assortment: usize,
    pub product_features: Vec<Vec<f64>>,
    /// `customer_features[j][i]`.
    pub customer_features: Vec<Vec<Vec<f64>>>,
    pub prices: Vec<f64>,
    pub categories: Vec<u8>,
    pub sigma: Vec<f64>,
    /// `durations[j][i]`.
    pub durations: Vec<Vec<DurationDist>>,
    pub capacities: Vec<f64>,
    /// Over `n_customers + 1` types, the last being the null type.
    pub arrival_probs: Vec<f64>,
}

pub struct MnlBuilt {
    pub instance: Instance,
    pub model: Arc<MnlModel>,
}

impl MnlSpec {
    pub fn build(&self) -> Result<MnlBuilt> {
        let model = Arc::new(MnlModel::from_spec(self)?);
        let instance = Instance::new(InstanceParts {
            capacities: self.capacities.clone(),
            arrival_probs: self.arrival_probs.clone(),
            model: model.clone(),
            null_type: Some(self.n_customers),
            null_action: Some(0),
            horizon_hint: None,
        })?;
        Ok(MnlBuilt { instance, model })
    }
}

/// KPI normalization and the two-category partition of products.
#[derive(Clone, Debug, PartialEq)]
pub struct KpiConfig {
    pub sigma: [f64; 3],
    /// Category (1 or 2) per product.
    pub categories: Vec<u8>,
    pub max_assortment: usize,
}

impl KpiConfig {
    pub fn new(sigma: [f64; 3], categories: Vec<u8>, max_assortment: usize) -> Result<Self> {
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidInstance("KPI scales must be positive".into()));
        }
        if categories.iter().any(|&c| c != 1 && c != 2) {
            return Err(Error::InvalidInstance("categories must be 1 or 2".into()));
        }
        Ok(Self {
            sigma,
            categories,
            max_assortment,
        })
    }
}

/// `(W_1, W_2, W_3)` for the allocation vector `a` (one entry per product).
pub fn kpi_rewards(a: &[f64], prices: &[f64], kpi: &KpiConfig) -> [f64; 3] {
    let mut w = [0.0; 3];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        w[0] += prices[i] * ai;
        let c = kpi.categories[i] as usize;
        w[c] += ai;
    }
    [w[0] / kpi.sigma[0], w[1] / kpi.sigma[1], w[2] / kpi.sigma[2]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Choice {
    NoPurchase,
    Product(usize),
}

pub struct MnlModel {
    n_products: usize,
    n_customers: usize,
    /// `utilities[j * n_products + i] = exp(b_ij . f_i)`.
    utilities: Vec<f64>,
    prices: Vec<f64>,
    kpi: KpiConfig,
    durations: Vec<DurationDist>,
    duration_pickers: Vec<WeightedIndex<f64>>,
    mean_durations: Vec<f64>,
    actions: Vec<Vec<usize>>,
    bounds: SupportBounds,
}

impl std::fmt::Debug for MnlModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MnlModel")
            .field("n_products", &self.n_products)
            .field("n_customers", &self.n_customers)
            .field("n_actions", &self.actions.len())
            .finish_non_exhaustive()
    }
}

/// All subsets of `0..n` of size at most `max_size`, by size then
/// lexicographically; the empty set comes first.
pub fn enumerate_subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for size in 0..=max_size.min(n) {
        rec(0, n, size, &mut Vec::new(), &mut out);
    }
    out
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

impl MnlModel {
    pub fn from_spec(spec: &MnlSpec) -> Result<Self> {
        let n = spec.n_products;
        let nj = spec.n_customers;
        let bad = |msg: &str| Error::InvalidInstance(msg.to_string());
        if spec.product_features.len() != n || spec.prices.len() != n || spec.categories.len() != n {
            return Err(bad("product arrays must have n_products entries"));
        }
        if spec.customer_features.len() != nj || spec.durations.len() != nj {
            return Err(bad("customer arrays must have n_customers entries"));
        }
        if spec.sigma.len() != 3 {
            return Err(bad("sigma must have three entries"));
        }
        if spec.prices.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(bad("prices must be nonnegative"));
        }
        let kpi = KpiConfig::new([spec.sigma[0], spec.sigma[1], spec.sigma[2]], spec.categories.clone(), spec.max_assortment)?;
        let mut utilities = Vec::with_capacity(nj * n);
        let mut durations = Vec::with_capacity(nj * n);
        for j in 0..nj {
            if spec.customer_features[j].len() != n || spec.durations[j].len() != n {
                return Err(bad("per-customer arrays must have n_products entries"));
            }
            for i in 0..n {
                let b = &spec.customer_features[j][i];
                let f = &spec.product_features[i];
                if b.len() != f.len() {
                    return Err(bad("feature dimensions differ"));
                }
                let u = b.iter().zip(f).map(|(x, y)| x * y).sum::<f64>().exp();
                if !(u.is_finite() && u > 0.0) {
                    return Err(bad("utility must be positive and finite"));
                }
                utilities.push(u);
                let dd = &spec.durations[j][i];
                if dd.values.is_empty() || dd.values.len() != dd.probs.len() {
                    return Err(bad("duration table shape"));
                }
                let s: f64 = dd.probs.iter().sum();
                if dd.probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::MalformedProbabilities(format!("duration of ({j},{i}) sums to {s}")));
                }
                durations.push(dd.clone());
            }
        }
        let duration_pickers = durations
            .iter()
            .map(|d| WeightedIndex::new(&d.probs).map_err(|e| Error::MalformedProbabilities(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let mean_durations: Vec<f64> = durations.iter().map(DurationDist::mean).collect();
        let actions = enumerate_subsets(n, spec.max_assortment);

        let mut w_max = 0.0f64;
        for i in 0..n {
            w_max = w_max.max(spec.prices[i] / kpi.sigma[0]);
            w_max = w_max.max(1.0 / kpi.sigma[kpi.categories[i] as usize]);
        }
        let mut v_max = 0.0f64;
        let mut d_max = 0u32;
        for idx in 0..nj * n {
            let u = utilities[idx];
            if spec.max_assortment > 0 {
                v_max = v_max.max(u / (1.0 + u) * mean_durations[idx]);
            }
            d_max = d_max.max(durations[idx].max());
        }
        Ok(Self {
            n_products: n,
            n_customers: nj,
            utilities,
            prices: spec.prices.clone(),
            kpi,
            durations,
            duration_pickers,
            mean_durations,
            actions,
            bounds: SupportBounds {
                w_max,
                a_max: 1.0,
                d_max,
                v_max,
            },
        })
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn n_customers(&self) -> usize {
        self.n_customers
    }

    pub fn null_type(&self) -> usize {
        self.n_customers
    }

    pub fn kpi(&self) -> &KpiConfig {
        &self.kpi
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn utilities(&self, j: usize) -> &[f64] {
        &self.utilities[j * self.n_products..(j + 1) * self.n_products]
    }

    pub fn mean_durations(&self, j: usize) -> &[f64] {
        &self.mean_durations[j * self.n_products..(j + 1) * self.n_products]
    }

    pub fn assortment(&self, k: usize) -> &[usize] {
        &self.actions[k]
    }

    /// Action index of a sorted assortment (size at most the cardinality limit).
    pub fn action_index(&self, set: &[usize]) -> Result<usize> {
        let n = self.n_products;
        let s = set.len();
        if s > self.kpi.max_assortment || set.iter().any(|&i| i >= n) || set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::OracleFailure(format!("not a valid assortment: {set:?}")));
        }
        let mut idx: usize = (0..s).map(|size| binom(n, size)).sum();
        let mut prev = 0;
        for (pos, &i) in set.iter().enumerate() {
            let remaining = s - pos - 1;
            for skipped in prev..i {
                idx += binom(n - skipped - 1, remaining);
            }
            prev = i + 1;
        }
        Ok(idx)
    }

    /// Choice probabilities of the offered products (in `set` order) and of no purchase.
    pub fn choice_probs(&self, j: usize, set: &[usize]) -> (Vec<f64>, f64) {
        if j >= self.n_customers {
            return (vec![0.0; set.len()], 1.0);
        }
        let u = self.utilities(j);
        let denom = 1.0 + set.iter().map(|&i| u[i]).sum::<f64>();
        (set.iter().map(|&i| u[i] / denom).collect(), 1.0 / denom)
    }

    /// `q_ijk`: zero when `i` is not offered.
    pub fn choice_prob(&self, j: usize, set: &[usize], choice: Choice) -> f64 {
        let (q, q0) = self.choice_probs(j, set);
        match choice {
            Choice::NoPurchase => q0,
            Choice::Product(i) => set.iter().position(|&x| x == i).map_or(0.0, |p| q[p]),
        }
    }

    /// Like [`choice_prob`](Self::choice_prob) but rejects products outside the assortment.
    pub fn offered_choice_prob(&self, j: usize, set: &[usize], i: usize) -> Result<f64> {
        match set.iter().position(|&x| x == i) {
            Some(p) => Ok(self.choice_probs(j, set).0[p]),
            None => Err(Error::ItemNotOffered(i)),
        }
    }

    pub fn sample_choice(&self, j: usize, set: &[usize], rng: &mut dyn RngCore) -> Choice {
        if set.is_empty() || j >= self.n_customers {
            return Choice::NoPurchase;
        }
        let u = self.utilities(j);
        let mut weights = Vec::with_capacity(set.len() + 1);
        weights.push(1.0);
        weights.extend(set.iter().map(|&i| u[i]));
        let pick = WeightedIndex::new(&weights).expect("positive utilities").sample(rng);
        if pick == 0 {
            Choice::NoPurchase
        } else {
            Choice::Product(set[pick - 1])
        }
    }

    /// `ρ_i = r_i φ_1/σ_1 + φ_{c(i)}/σ_{c(i)} − d̄_ij ψ_i` per product.
    pub fn oracle_coefficients(&self, j: usize, phi: &[f64], psi: &[f64]) -> Vec<f64> {
        let d = self.mean_durations(j);
        let s = &self.kpi.sigma;
        (0..self.n_products)
            .map(|i| {
                let c = self.kpi.categories[i] as usize;
                self.prices[i] * phi[0] / s[0] + phi[c] / s[c] - d[i] * psi[i]
            })
            .collect()
    }
}

/// Solves the cardinality-constrained MNL assortment LP
/// `max Σ ρ_i z_i` s.t. `Σ z_i + z_0 = 1`, `Σ z_i/u_i ≤ n z_0`, `0 ≤ z_i/u_i ≤ z_0`,
/// and reads the assortment off the support of `z`. Products with `ρ_i ≤ 0`
/// never improve the objective and are left out of the program.
pub fn assortment_oracle(u: &[f64], rho: &[f64], max_size: usize) -> Result<(Vec<usize>, f64)> {
    if u.len() != rho.len() {
        return Err(Error::DimensionMismatch("utilities and coefficients".into()));
    }
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::OracleFailure("non-finite coefficient".into()));
    }
    let cand: Vec<usize> = (0..u.len()).filter(|&i| rho[i] > 0.0).collect();
    if cand.is_empty() || max_size == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut lp = LinearProgram::maximize();
    let z0 = lp.add_var(0.0, true);
    let z: Vec<usize> = cand.iter().map(|&i| lp.add_var(rho[i], true)).collect();
    let mut sum = vec![(z0, 1.0)];
    sum.extend(z.iter().map(|&v| (v, 1.0)));
    lp.add_row(sum, Cmp::Eq, 1.0);
    let mut card = vec![(z0, -(max_size as f64))];
    card.extend(z.iter().zip(&cand).map(|(&v, &i)| (v, 1.0 / u[i])));
    lp.add_row(card, Cmp::Le, 0.0);
    for (&v, &i) in z.iter().zip(&cand) {
        lp.add_row(vec![(v, 1.0 / u[i]), (z0, -1.0)], Cmp::Le, 0.0);
    }
    let sol = Simplex::new(&lp)?.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::OracleFailure(format!("assortment LP is {:?}", sol.status)));
    }
    let x0 = sol.primal[z0];
    let mut set = Vec::new();
    for (&v, &i) in z.iter().zip(&cand) {
        let zi = sol.primal[v];
        if zi > SUPPORT_TOL {
            if ((zi / u[i]) - x0).abs() > INTEGRALITY_TOL * x0.max(1.0) {
                return Err(Error::OracleFailure(format!(
                    "fractional assortment LP solution (z_{i}/u_{i} = {}, z_0 = {x0})",
                    zi / u[i]
                )));
            }
            set.push(i);
        }
    }
    if set.len() > max_size {
        return Err(Error::OracleFailure("assortment exceeds the cardinality limit".into()));
    }
    let denom = 1.0 + set.iter().map(|&i| u[i]).sum::<f64>();
    let value = set.iter().map(|&i| rho[i] * u[i]).sum::<f64>() / denom;
    Ok((set, value))
}

impl OutcomeModel for MnlModel {
    fn dims(&self) -> Dims {
        Dims {
            n_rewards: 3,
            n_resources: self.n_products,
            n_types: self.n_customers + 1,
            n_actions: self.actions.len(),
        }
    }

    fn sample(&self, j: usize, k: usize, rng: &mut dyn RngCore) -> Outcome {
        let mut out = Outcome::zero(3, self.n_products);
        if j >= self.n_customers {
            return out;
        }
        if let Choice::Product(i) = self.sample_choice(j, &self.actions[k], rng) {
            let idx = j * self.n_products + i;
            let dur = self.durations[idx].values[self.duration_pickers[idx].sample(rng)];
            out.allocs[i] = 1.0;
            out.durations[i] = dur;
            out.rewards = kpi_rewards(&out.allocs, &self.prices, &self.kpi).to_vec();
        }
        out
    }

    fn means(&self, j: usize, k: usize) -> MeanOutcome {
        let n = self.n_products;
        let mut a = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut d = vec![0.0; n];
        if j >= self.n_customers {
            return MeanOutcome { w: vec![0.0; 3], v, a, d };
        }
        let set = &self.actions[k];
        let (q, _) = self.choice_probs(j, set);
        for (&i, &qi) in set.iter().zip(&q) {
            let dur = self.mean_durations[j * n + i];
            a[i] = qi;
            v[i] = qi * dur;
            d[i] = qi * dur;
        }
        let w = kpi_rewards(&a, &self.prices, &self.kpi).to_vec();
        MeanOutcome { w, v, a, d }
    }

    fn alloc_tail(&self, j: usize, k: usize, s: u32) -> Vec<f64> {
        let n = self.n_products;
        let mut out = vec![0.0; n];
        if j >= self.n_customers {
            return out;
        }
        let set = &self.actions[k];
        let (q, _) = self.choice_probs(j, set);
        for (&i, &qi) in set.iter().zip(&q) {
            out[i] = qi * self.durations[j * n + i].tail(s);
        }
        out
    }

    fn support_bounds(&self) -> SupportBounds {
        self.bounds
    }

    fn kappa(&self, j: usize, phi: &[f64], psi: &[f64]) -> Result<usize> {
        if j >= self.n_customers {
            return Ok(0);
        }
        let rho = self.oracle_coefficients(j, phi, psi);
        let (set, _) = assortment_oracle(self.utilities(j), &rho, self.kpi.max_assortment)?;
        self.action_index(&set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_count_matches_binomials() {
        let s = enumerate_subsets(14, 5);
        assert_eq!(s.len(), 1 + 3472);
        assert!(s[0].is_empty());
        assert_eq!(s[1], vec![0]);
    }

    #[test]
    fn oracle_two_products() {
        let (set, val) = assortment_oracle(&[1.0, 1.0], &[1.0, 0.5], 1).unwrap();
        assert_eq!(set, vec![0]);
        assert!((val - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oracle_nonpositive_coefficients_offer_nothing() {
        let (set, val) = assortment_oracle(&[2.0, 1.0], &[0.0, -1.0], 2).unwrap();
        assert!(set.is_empty());
        assert_eq!(val, 0.0);
    }

    #[test]
    fn kpi_definition() {
        let kpi = KpiConfig::new([1.0, 1.0, 1.0], vec![1, 2], 2).unwrap();
        assert_eq!(kpi_rewards(&[1.0, 0.0], &[2.0, 3.0], &kpi), [2.0, 1.0, 0.0]);
        assert_eq!(kpi_rewards(&[0.0, 0.0], &[2.0, 3.0], &kpi), [0.0, 0.0, 0.0]);
        let kpi2 = KpiConfig::new([2.0, 2.0, 2.0], vec![1, 2], 2).unwrap();
        assert_eq!(kpi_rewards(&[1.0, 0.0], &[2.0, 3.0], &kpi2), [1.0, 0.5, 0.0]);
    }
}
