//! Instances: index sets, capacities, arrival distribution, outcome model
//! and the derived bounds.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n_rewards: usize,
    pub n_resources: usize,
    pub n_types: usize,
    pub n_actions: usize,
}

/// One realized outcome `(W, A, D)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub rewards: Vec<f64>,
    pub allocs: Vec<f64>,
    pub durations: Vec<u32>,
}

impl Outcome {
    pub fn zero(n_rewards: usize, n_resources: usize) -> Self {
        Self {
            rewards: vec![0.0; n_rewards],
            allocs: vec![0.0; n_resources],
            durations: vec![0; n_resources],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rewards.iter().all(|&w| w == 0.0)
            && self.allocs.iter().all(|&a| a == 0.0)
            && self.durations.iter().all(|&d| d == 0)
    }
}

/// Means for one `(j, k)`: `w` over rewards; `v = E[A D]`, `a`, `d` over resources.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanOutcome {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
}

/// Almost-sure support bounds declared by an outcome model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportBounds {
    pub w_max: f64,
    pub a_max: f64,
    pub d_max: u32,
    pub v_max: f64,
}

pub trait OutcomeModel: Send + Sync + fmt::Debug {
    fn dims(&self) -> Dims;

    fn sample(&self, j: usize, k: usize, rng: &mut dyn RngCore) -> Outcome;

    fn means(&self, j: usize, k: usize) -> MeanOutcome;

    /// `E[A_i 1(D_i >= s)]` per resource, for `s >= 1`.
    fn alloc_tail(&self, j: usize, k: usize, s: u32) -> Vec<f64>;

    fn support_bounds(&self) -> SupportBounds;

    /// Argmax of `phi . w_jk - psi . v_jk` over actions, lowest index on ties.
    fn kappa(&self, j: usize, phi: &[f64], psi: &[f64]) -> Result<usize> {
        Ok(kappa_by_enumeration(self, j, phi, psi))
    }

    fn as_table(&self) -> Option<&TableModel> {
        None
    }
}

pub fn kappa_by_enumeration<M: OutcomeModel + ?Sized>(
    model: &M,
    j: usize,
    phi: &[f64],
    psi: &[f64],
) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..model.dims().n_actions {
        let m = model.means(j, k);
        let val = dot(phi, &m.w) - dot(psi, &m.v);
        if val > best_val {
            best_val = val;
            best = k;
        }
    }
    best
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportPoint {
    pub prob: f64,
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub d: Vec<u32>,
}

/// Finite-support joint outcome tables. Pairs without an entry, and every
/// pair involving the null type or null action, yield the zero outcome.
#[derive(Clone)]
pub struct TableModel {
    dims: Dims,
    support: Vec<Vec<SupportPoint>>,
    pickers: Vec<Option<WeightedIndex<f64>>>,
    means: Vec<MeanOutcome>,
    bounds: SupportBounds,
}

impl fmt::Debug for TableModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TableModel")
            .field("dims", &self.dims)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl TableModel {
    pub fn new(
        dims: Dims,
        entries: Vec<(usize, usize, Vec<SupportPoint>)>,
        null_type: usize,
        null_action: usize,
    ) -> Result<Self> {
        let n_pairs = dims.n_types * dims.n_actions;
        let mut support: Vec<Vec<SupportPoint>> = vec![Vec::new(); n_pairs];
        for (j, k, pts) in entries {
            if j >= dims.n_types {
                return Err(Error::IndexOutOfRange {
                    what: "type",
                    index: j,
                    len: dims.n_types,
                });
            }
            if k >= dims.n_actions {
                return Err(Error::IndexOutOfRange {
                    what: "action",
                    index: k,
                    len: dims.n_actions,
                });
            }
            if j == null_type || k == null_action {
                continue;
            }
            check_support(&dims, j, k, &pts)?;
            support[j * dims.n_actions + k] = pts;
        }

        let mut pickers = Vec::with_capacity(n_pairs);
        let mut means = Vec::with_capacity(n_pairs);
        let mut b = SupportBounds {
            w_max: 0.0,
            a_max: 0.0,
            d_max: 0,
            v_max: 0.0,
        };
        for pts in &support {
            let picker = if pts.len() > 1 {
                let w: Vec<f64> = pts.iter().map(|p| p.prob).collect();
                Some(WeightedIndex::new(&w).map_err(|e| Error::MalformedProbabilities(e.to_string()))?)
            } else {
                None
            };
            pickers.push(picker);
            let mut m = MeanOutcome {
                w: vec![0.0; dims.n_rewards],
                v: vec![0.0; dims.n_resources],
                a: vec![0.0; dims.n_resources],
                d: vec![0.0; dims.n_resources],
            };
            for p in pts {
                for i in 0..dims.n_rewards {
                    m.w[i] += p.prob * p.w[i];
                    b.w_max = b.w_max.max(p.w[i]);
                }
                for i in 0..dims.n_resources {
                    m.a[i] += p.prob * p.a[i];
                    m.d[i] += p.prob * p.d[i] as f64;
                    m.v[i] += p.prob * p.a[i] * p.d[i] as f64;
                    b.a_max = b.a_max.max(p.a[i]);
                    b.d_max = b.d_max.max(p.d[i]);
                }
            }
            for &v in &m.v {
                b.v_max = b.v_max.max(v);
            }
            means.push(m);
        }
        Ok(Self {
            dims,
            support,
            pickers,
            means,
            bounds: b,
        })
    }

    pub fn support(&self, j: usize, k: usize) -> &[SupportPoint] {
        &self.support[j * self.dims.n_actions + k]
    }

    pub fn mean_ref(&self, j: usize, k: usize) -> &MeanOutcome {
        &self.means[j * self.dims.n_actions + k]
    }
}

fn check_support(dims: &Dims, j: usize, k: usize, pts: &[SupportPoint]) -> Result<()> {
    if pts.is_empty() {
        return Err(Error::MalformedProbabilities(format!("empty support for ({j},{k})")));
    }
    let mut total = 0.0;
    for p in pts {
        if !(p.prob.is_finite() && p.prob >= 0.0) {
            return Err(Error::MalformedProbabilities(format!(
                "probability {} for ({j},{k})",
                p.prob
            )));
        }
        total += p.prob;
        if p.w.len() != dims.n_rewards || p.a.len() != dims.n_resources || p.d.len() != dims.n_resources {
            return Err(Error::DimensionMismatch(format!("support point for ({j},{k})")));
        }
        if p.w.iter().chain(&p.a).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInstance(format!(
                "negative or non-finite outcome for ({j},{k})"
            )));
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedProbabilities(format!(
            "support of ({j},{k}) sums to {total}"
        )));
    }
    Ok(())
}

impl OutcomeModel for TableModel {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn sample(&self, j: usize, k: usize, rng: &mut dyn RngCore) -> Outcome {
        let idx = j * self.dims.n_actions + k;
        let pts = &self.support[idx];
        if pts.is_empty() {
            return Outcome::zero(self.dims.n_rewards, self.dims.n_resources);
        }
        let pick = match &self.pickers[idx] {
            Some(w) => w.sample(rng),
            None => 0,
        };
        let p = &pts[pick];
        Outcome {
            rewards: p.w.clone(),
            allocs: p.a.clone(),
            durations: p.d.clone(),
        }
    }

    fn means(&self, j: usize, k: usize) -> MeanOutcome {
        self.mean_ref(j, k).clone()
    }

    fn alloc_tail(&self, j: usize, k: usize, s: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.n_resources];
        for p in self.support(j, k) {
            for i in 0..self.dims.n_resources {
                if p.d[i] >= s {
                    out[i] += p.prob * p.a[i];
                }
            }
        }
        out
    }

    fn support_bounds(&self) -> SupportBounds {
        self.bounds
    }

    fn kappa(&self, j: usize, phi: &[f64], psi: &[f64]) -> Result<usize> {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for k in 0..self.dims.n_actions {
            let m = self.mean_ref(j, k);
            let val = dot(phi, &m.w) - dot(psi, &m.v);
            if val > best_val {
                best_val = val;
                best = k;
            }
        }
        Ok(best)
    }

    fn as_table(&self) -> Option<&TableModel> {
        Some(self)
    }
}

/// Derived bounds. A zero support bound (e.g. an all-null instance) is
/// replaced by 1 so that learning rates and error terms stay finite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub w_max: f64,
    pub a_max: f64,
    pub d_max: u32,
    pub v_max: f64,
    pub gamma: f64,
    pub c_min: f64,
    pub xi: f64,
    /// `xi * ln(|I_c| / xi)`; the capacity assumption asks for `<= 1`.
    pub assumption_value: f64,
    pub assumption_holds: bool,
}

impl Bounds {
    pub fn new(support: SupportBounds, c_min: f64, n_resources: usize) -> Self {
        let pos = |x: f64| if x > 0.0 { x } else { 1.0 };
        let w_max = pos(support.w_max);
        let a_max = pos(support.a_max);
        let v_max = pos(support.v_max);
        let d_max = support.d_max.max(1);
        let xi = a_max / c_min;
        let assumption_value = xi * (n_resources as f64 / xi).ln();
        Self {
            w_max,
            a_max,
            d_max,
            v_max,
            gamma: w_max.max(v_max),
            c_min,
            xi,
            assumption_value,
            assumption_holds: assumption_value <= 1.0,
        }
    }
}

/// Description used to build an [`Instance`].
pub struct InstanceParts {
    pub capacities: Vec<f64>,
    pub arrival_probs: Vec<f64>,
    pub model: Arc<dyn OutcomeModel>,
    pub null_type: Option<usize>,
    pub null_action: Option<usize>,
    pub horizon_hint: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Instance {
    capacities: Vec<f64>,
    arrival_probs: Vec<f64>,
    model: Arc<dyn OutcomeModel>,
    null_type: usize,
    null_action: usize,
    horizon_hint: Option<usize>,
    bounds: Bounds,
    dims: Dims,
}

impl Instance {
    pub fn new(parts: InstanceParts) -> Result<Self> {
        let dims = parts.model.dims();
        let null_type = parts.null_type.ok_or(Error::MissingNullType)?;
        let null_action = parts.null_action.ok_or(Error::MissingNullAction)?;
        if null_type >= dims.n_types {
            return Err(Error::IndexOutOfRange {
                what: "null type",
                index: null_type,
                len: dims.n_types,
            });
        }
        if null_action >= dims.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "null action",
                index: null_action,
                len: dims.n_actions,
            });
        }
        if dims.n_rewards == 0 {
            return Err(Error::InvalidInstance("at least one reward index is required".into()));
        }
        if parts.capacities.len() != dims.n_resources {
            return Err(Error::DimensionMismatch(format!(
                "{} capacities for {} resources",
                parts.capacities.len(),
                dims.n_resources
            )));
        }
        for (i, &c) in parts.capacities.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::NonpositiveCapacity { index: i, value: c });
            }
        }
        check_probability_vector(&parts.arrival_probs, dims.n_types)?;

        for k in 0..dims.n_actions {
            if !is_zero_mean(&parts.model.means(null_type, k)) {
                return Err(Error::InvalidInstance(format!("null type has nonzero outcome under action {k}")));
            }
        }
        for j in 0..dims.n_types {
            if !is_zero_mean(&parts.model.means(j, null_action)) {
                return Err(Error::InvalidInstance(format!("null action has nonzero outcome for type {j}")));
            }
        }

        let c_min = parts.capacities.iter().copied().fold(f64::INFINITY, f64::min);
        let c_min = if dims.n_resources == 0 { 1.0 } else { c_min };
        let bounds = Bounds::new(parts.model.support_bounds(), c_min, dims.n_resources);
        Ok(Self {
            capacities: parts.capacities,
            arrival_probs: parts.arrival_probs,
            model: parts.model,
            null_type,
            null_action,
            horizon_hint: parts.horizon_hint,
            bounds,
            dims,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn n_rewards(&self) -> usize {
        self.dims.n_rewards
    }
    pub fn n_resources(&self) -> usize {
        self.dims.n_resources
    }
    pub fn n_types(&self) -> usize {
        self.dims.n_types
    }
    pub fn n_actions(&self) -> usize {
        self.dims.n_actions
    }
    pub fn capacities(&self) -> &[f64] {
        &self.capacities
    }
    pub fn arrival_probs(&self) -> &[f64] {
        &self.arrival_probs
    }
    pub fn model(&self) -> &Arc<dyn OutcomeModel> {
        &self.model
    }
    pub fn null_type(&self) -> usize {
        self.null_type
    }
    pub fn null_action(&self) -> usize {
        self.null_action
    }
    pub fn horizon_hint(&self) -> Option<usize> {
        self.horizon_hint
    }
    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Same instance with new capacities (bounds recomputed).
    pub fn with_capacities(&self, capacities: Vec<f64>) -> Result<Self> {
        Self::new(InstanceParts {
            capacities,
            arrival_probs: self.arrival_probs.clone(),
            model: self.model.clone(),
            null_type: Some(self.null_type),
            null_action: Some(self.null_action),
            horizon_hint: self.horizon_hint,
        })
    }

    fn check_type(&self, j: usize) -> Result<()> {
        if j >= self.dims.n_types {
            return Err(Error::IndexOutOfRange {
                what: "type",
                index: j,
                len: self.dims.n_types,
            });
        }
        Ok(())
    }

    fn check_action(&self, k: usize) -> Result<()> {
        if k >= self.dims.n_actions {
            return Err(Error::IndexOutOfRange {
                what: "action",
                index: k,
                len: self.dims.n_actions,
            });
        }
        Ok(())
    }

    pub fn sample_outcome(&self, j: usize, k: usize, rng: &mut dyn RngCore) -> Result<Outcome> {
        self.check_type(j)?;
        self.check_action(k)?;
        if j == self.null_type || k == self.null_action {
            return Ok(Outcome::zero(self.dims.n_rewards, self.dims.n_resources));
        }
        Ok(self.model.sample(j, k, rng))
    }

    pub fn means(&self, j: usize, k: usize) -> Result<MeanOutcome> {
        self.check_type(j)?;
        self.check_action(k)?;
        Ok(self.model.means(j, k))
    }

    /// The `(w_jk, v_jk)` pairs over all actions: the per-arrival information
    /// a policy is allowed to see.
    pub fn mean_outcomes_for_type(&self, j: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.check_type(j)?;
        Ok((0..self.dims.n_actions)
            .map(|k| {
                let m = self.model.means(j, k);
                (m.w, m.v)
            })
            .collect())
    }

    pub fn kappa(&self, j: usize, phi: &[f64], psi: &[f64]) -> Result<usize> {
        self.check_type(j)?;
        self.model.kappa(j, phi, psi)
    }
}

fn is_zero_mean(m: &MeanOutcome) -> bool {
    m.w.iter().chain(&m.v).chain(&m.a).chain(&m.d).all(|&x| x == 0.0)
}

pub fn check_probability_vector(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::MalformedProbabilities(format!("expected {n} entries, got {}", p.len())));
    }
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::MalformedProbabilities(format!("entry {x}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::MalformedProbabilities(format!("sum is {s}")));
    }
    Ok(())
}

/// Draws an arrival type from `p`.
pub fn sample_arrival<R: rand::Rng + ?Sized>(rng: &mut R, p: &[f64]) -> Result<usize> {
    let w = WeightedIndex::new(p).map_err(|e| Error::MalformedProbabilities(e.to_string()))?;
    Ok(w.sample(rng))
}

/// Reusable arrival sampler for long episodes.
#[derive(Clone, Debug)]
pub struct ArrivalSampler {
    dist: WeightedIndex<f64>,
}

impl ArrivalSampler {
    pub fn new(p: &[f64]) -> Result<Self> {
        let dist = WeightedIndex::new(p).map_err(|e| Error::MalformedProbabilities(e.to_string()))?;
        Ok(Self { dist })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

// ---------------------------------------------------------------------------
// Instance files

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeEntry {
    #[serde(rename = "type")]
    pub type_index: usize,
    pub action: usize,
    pub support: Vec<SupportPoint>,
}

/// Finite-support instance description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub n_rewards: usize,
    pub n_resources: usize,
    pub n_types: usize,
    pub n_actions: usize,
    pub capacities: Vec<f64>,
    pub arrival_probs: Vec<f64>,
    pub null_type: Option<usize>,
    pub null_action: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_hint: Option<usize>,
    pub outcomes: Vec<OutcomeEntry>,
}

pub fn build_instance(spec: &TableSpec) -> Result<Instance> {
    let null_type = spec.null_type.ok_or(Error::MissingNullType)?;
    let null_action = spec.null_action.ok_or(Error::MissingNullAction)?;
    let dims = Dims {
        n_rewards: spec.n_rewards,
        n_resources: spec.n_resources,
        n_types: spec.n_types,
        n_actions: spec.n_actions,
    };
    if null_type >= dims.n_types || null_action >= dims.n_actions {
        return Err(Error::InvalidInstance("null index out of range".into()));
    }
    let entries = spec
        .outcomes
        .iter()
        .map(|e| (e.type_index, e.action, e.support.clone()))
        .collect();
    let model = TableModel::new(dims, entries, null_type, null_action)?;
    Instance::new(InstanceParts {
        capacities: spec.capacities.clone(),
        arrival_probs: spec.arrival_probs.clone(),
        model: Arc::new(model),
        null_type: Some(null_type),
        null_action: Some(null_action),
        horizon_hint: spec.horizon_hint,
    })
}

/// On-disk instance: either explicit tables or a synthetic MNL model.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceFile {
    Table(TableSpec),
    Mnl(crate::assortment::MnlSpec),
}

impl InstanceFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build(&self) -> Result<Instance> {
        match self {
            InstanceFile::Table(t) => build_instance(t),
            InstanceFile::Mnl(m) => Ok(m.build()?.instance),
        }
    }
}

/// The deterministic two-action instance on which the steady-state and
/// expectation benchmarks differ by `d/8` (`d` even, `T = d/2`).
pub fn gap_instance(d: u32) -> Result<Instance> {
    build_instance(&gap_instance_spec(d))
}

pub fn gap_instance_spec(d: u32) -> TableSpec {
    assert!(d >= 2 && d % 2 == 0, "d must be even and positive");
    let half = d / 2;
    TableSpec {
        n_rewards: 1,
        n_resources: 1,
        n_types: 2,
        n_actions: 3,
        capacities: vec![half as f64],
        arrival_probs: vec![1.0, 0.0],
        null_type: Some(1),
        null_action: Some(0),
        horizon_hint: Some(half as usize),
        outcomes: vec![
            OutcomeEntry {
                type_index: 0,
                action: 1,
                support: vec![SupportPoint {
                    prob: 1.0,
                    w: vec![0.75],
                    a: vec![1.0],
                    d: vec![half],
                }],
            },
            OutcomeEntry {
                type_index: 0,
                action: 2,
                support: vec![SupportPoint {
                    prob: 1.0,
                    w: vec![1.0],
                    a: vec![1.0],
                    d: vec![d],
                }],
            },
        ],
    }
}
