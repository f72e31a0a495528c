//! Synthetic MNL instances, multi-seed runs and the metric files they produce.
//!
//! Per seed the runner writes `<policy>_seed<seed>_metrics.csv` with columns
//! `t, gap_1..gap_R, normalized_reward, occupied_1..occupied_C`, optionally
//! the full trajectory, and finally `<policy>_summary.json`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::distr::{Distribution, Uniform};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assortment::{DurationDist, MnlSpec};
use crate::error::{Error, Result};
use crate::lp::{solve_lp_s, SteadyState};
use crate::model::{Instance, InstanceFile};
use crate::policy::PolicySpec;
use crate::rng::{stream, substream, Stream};
use crate::simulator::{csv_err, run_episode, Trajectory};

pub const OUTPUT_DIR_ENV: &str = "REUSEALLOC_OUTPUT_DIR";

/// Generator settings. Unset `duration_cap` means `horizon / 5`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub seed: u64,
    pub n_products: usize,
    pub n_customers: usize,
    pub max_assortment: usize,
    pub feature_dim: usize,
    pub price_range: [f64; 2],
    pub duration_cap: Option<u32>,
    /// Number of distinct values in each duration distribution.
    pub duration_support: usize,
    /// Sets every capacity to `1 / xi` (allocations are single units).
    pub xi: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            seed: 1,
            n_products: 14,
            n_customers: 1000,
            max_assortment: 5,
            feature_dim: 4,
            price_range: [1.0, 5.0],
            duration_cap: None,
            duration_support: 3,
            xi: 1.0 / 20.0,
        }
    }
}

const CUSTOMER_STREAM_BASE: u64 = 1 << 20;

/// Draws an MNL instance. Products come from one stream and each customer
/// type from its own, so instances with more customers extend those with
/// fewer under the same seed.
pub fn generate_synthetic(params: &SyntheticParams, horizon: usize) -> Result<MnlSpec> {
    let n = params.n_products;
    if n == 0 || params.n_customers == 0 || params.feature_dim == 0 {
        return Err(Error::Config("generator needs products, customers and features".into()));
    }
    if !(params.xi > 0.0 && params.xi <= 1.0) {
        return Err(Error::Config(format!("xi must lie in (0, 1], got {}", params.xi)));
    }
    let [lo, hi] = params.price_range;
    if !(lo >= 0.0 && lo < hi) {
        return Err(Error::Config("price range must be increasing and nonnegative".into()));
    }
    let cap = params.duration_cap.unwrap_or((horizon / 5) as u32).max(1);
    let support = params.duration_support.clamp(1, cap as usize);

    let unit = Uniform::new(-1.0, 1.0).expect("valid range");
    let price = Uniform::new(lo, hi).expect("valid range");
    let mut rng = stream(params.seed, Stream::Generator);
    let product_features: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..params.feature_dim).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let prices: Vec<f64> = (0..n).map(|_| price.sample(&mut rng)).collect();
    let categories: Vec<u8> = (0..n).map(|i| if i < n.div_ceil(2) { 1 } else { 2 }).collect();

    let mut customer_features = Vec::with_capacity(params.n_customers);
    let mut durations = Vec::with_capacity(params.n_customers);
    for j in 0..params.n_customers {
        let mut r = substream(params.seed, CUSTOMER_STREAM_BASE + j as u64);
        customer_features.push(
            (0..n)
                .map(|_| (0..params.feature_dim).map(|_| unit.sample(&mut r)).collect())
                .collect(),
        );
        durations.push((0..n).map(|_| random_duration(&mut r, cap, support)).collect());
    }
    let mean_price = prices.iter().sum::<f64>() / n as f64;
    let mut arrival_probs = vec![1.0 / params.n_customers as f64; params.n_customers];
    arrival_probs.push(0.0);
    Ok(MnlSpec {
        n_products: n,
        n_customers: params.n_customers,
        max_assortment: params.max_assortment,
        product_features,
        customer_features,
        prices,
        categories,
        sigma: vec![mean_price, 1.0, 1.0],
        durations,
        capacities: vec![1.0 / params.xi; n],
        arrival_probs,
    })
}

fn random_duration<R: Rng>(rng: &mut R, cap: u32, support: usize) -> DurationDist {
    let mut values: Vec<u32> = sample(rng, cap as usize, support).into_iter().map(|v| v as u32 + 1).collect();
    values.sort_unstable();
    let raw: Vec<f64> = (0..support).map(|_| rng.random::<f64>() + 1e-3).collect();
    let z: f64 = raw.iter().sum();
    DurationDist {
        values,
        probs: raw.iter().map(|x| x / z).collect(),
    }
}

/// Reward gaps and normalized reward over time.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub lambda_star: f64,
    /// `reward_gap[t-1][i] = (t lambda - sum_{s<=t} W_i(s)) / (t lambda)`.
    pub reward_gap: Vec<Vec<f64>>,
    /// `min_i (1/t) sum_{s<=t} W_i(s)`.
    pub normalized_reward: Vec<f64>,
    pub occupied: Vec<Vec<f64>>,
}

impl MetricSeries {
    pub fn from_cumulative(cum: &[Vec<f64>], occupied: Vec<Vec<f64>>, lambda_star: f64) -> Result<Self> {
        if !(lambda_star > 0.0) {
            return Err(Error::ZeroBenchmark(lambda_star));
        }
        let mut reward_gap = Vec::with_capacity(cum.len());
        let mut normalized_reward = Vec::with_capacity(cum.len());
        for (idx, c) in cum.iter().enumerate() {
            let t = (idx + 1) as f64;
            let target = t * lambda_star;
            reward_gap.push(c.iter().map(|w| (target - w) / target).collect());
            normalized_reward.push(c.iter().map(|w| w / t).fold(f64::INFINITY, f64::min));
        }
        Ok(Self {
            lambda_star,
            reward_gap,
            normalized_reward,
            occupied,
        })
    }

    pub fn len(&self) -> usize {
        self.normalized_reward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized_reward.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let nr = self.reward_gap.first().map_or(0, Vec::len);
        let nc = self.occupied.first().map_or(0, Vec::len);
        let mut h = vec!["t".to_string()];
        h.extend((1..=nr).map(|i| format!("gap_{i}")));
        h.push("normalized_reward".into());
        h.extend((1..=nc).map(|i| format!("occupied_{i}")));
        w.write_record(&h).map_err(csv_err)?;
        for t in 0..self.len() {
            let mut rec = vec![(t + 1).to_string()];
            rec.extend(self.reward_gap[t].iter().map(|x| x.to_string()));
            rec.push(self.normalized_reward[t].to_string());
            rec.extend(self.occupied[t].iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compute_metrics(traj: &Trajectory, lambda_star: f64) -> Result<MetricSeries> {
    let cum: Vec<Vec<f64>> = (1..=traj.len()).map(|t| traj.cum_rewards(t).to_vec()).collect();
    let occ: Vec<Vec<f64>> = (1..=traj.len()).map(|t| traj.occupied(t).to_vec()).collect();
    MetricSeries::from_cumulative(&cum, occ, lambda_star)
}

/// Recomputes metrics from an exported trajectory CSV.
pub fn metrics_from_trajectory_csv<R: Read>(input: R, lambda_star: f64) -> Result<MetricSeries> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols = |prefix: &str| -> Vec<usize> {
        header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.strip_prefix(prefix).is_some_and(|r| r.parse::<usize>().is_ok()))
            .map(|(i, _)| i)
            .collect()
    };
    let cum_cols = cols("cum_W_");
    let occ_cols = cols("occupied_");
    let mut cum = Vec::new();
    let mut occ = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |i: &usize| -> Result<f64> {
            rec[*i].parse::<f64>().map_err(|e| Error::Parse(format!("{e}: {}", &rec[*i])))
        };
        cum.push(cum_cols.iter().map(parse).collect::<Result<Vec<_>>>()?);
        occ.push(occ_cols.iter().map(parse).collect::<Result<Vec<_>>>()?);
    }
    MetricSeries::from_cumulative(&cum, occ, lambda_star)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSource {
    File { path: PathBuf },
    Synthetic(SyntheticParams),
}

/// A run description, read from TOML.
///
/// ```toml
/// horizon = 10000
/// seeds = [0, 1, 2]
/// output_dir = "results/xi20"
///
/// [instance]
/// source = "synthetic"
/// seed = 7
/// xi = 0.05
///
/// [policy]
/// name = "imwu"
/// delta = 0.1
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides capacities as `a_max / xi` for file instances.
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub write_trajectories: bool,
    pub instance: InstanceSource,
    pub policy: PolicySpec,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0 && xi <= 1.0) {
                return Err(Error::Config(format!("xi must lie in (0, 1], got {xi}")));
            }
        }
        if let PolicySpec::Imwu { delta } = self.policy {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::InvalidDelta(delta));
            }
        }
        Ok(())
    }

    /// The configured directory, unless the environment overrides it.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| self.output_dir.clone(), PathBuf::from)
    }

    pub fn build_instance(&self) -> Result<Instance> {
        let inst = match &self.instance {
            InstanceSource::File { path } => InstanceFile::load(path)?.build()?,
            InstanceSource::Synthetic(p) => generate_synthetic(p, self.horizon)?.build()?.instance,
        };
        match self.xi {
            Some(xi) => {
                let c = inst.bounds().a_max / xi;
                inst.with_capacities(vec![c; inst.n_resources()])
            }
            None => Ok(inst),
        }
    }
}

/// Final values of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub final_reward_gap: Vec<f64>,
    pub final_normalized_reward: f64,
    pub violations: usize,
}

/// Cross-seed mean and population variance (divisor n) per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: String,
    pub horizon: usize,
    pub lambda_star: f64,
    /// Reward indices whose benchmark row is tight.
    pub binding_rewards: Vec<usize>,
    /// Largest duality gap over the benchmark and every program the policy solved.
    pub max_lp_duality_gap: f64,
    pub seeds: Vec<u64>,
    pub complete: bool,
    pub failed_seeds: Vec<u64>,
    pub errors: Vec<String>,
    pub violations: usize,
    pub per_seed: Vec<SeedResult>,
    /// `[t-1][i]`.
    pub reward_gap_mean: Vec<Vec<f64>>,
    pub reward_gap_variance: Vec<Vec<f64>>,
    pub normalized_reward_mean: Vec<f64>,
    pub normalized_reward_variance: Vec<f64>,
}

impl Summary {
    pub fn final_reward_gap_mean(&self) -> Vec<f64> {
        self.reward_gap_mean.last().cloned().unwrap_or_default()
    }

    pub fn final_normalized_reward_mean(&self) -> f64 {
        self.normalized_reward_mean.last().copied().unwrap_or(f64::NAN)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// One simulated seed.
#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub metrics: MetricSeries,
    pub violations: usize,
    pub lp_duality_gap: Option<f64>,
    pub trajectory: Option<Trajectory>,
}

pub fn run_seed(
    inst: &Instance,
    spec: &PolicySpec,
    horizon: usize,
    seed: u64,
    lambda_star: f64,
    keep_trajectory: bool,
) -> Result<SeedRun> {
    let mut policy = spec.build(inst)?;
    let traj = run_episode(inst, policy.as_mut(), horizon, seed)?;
    Ok(SeedRun {
        seed,
        metrics: compute_metrics(&traj, lambda_star)?,
        violations: traj.violations(),
        lp_duality_gap: policy.lp_duality_gap(),
        trajectory: keep_trajectory.then_some(traj),
    })
}

pub fn summarize(policy: &str, ss: &SteadyState, horizon: usize, runs: &[(u64, Result<SeedRun>)]) -> Summary {
    let mut ok: Vec<&SeedRun> = Vec::new();
    let mut failed = Vec::new();
    let mut errors = Vec::new();
    for (seed, res) in runs {
        match res {
            Ok(r) => ok.push(r),
            Err(e) => {
                failed.push(*seed);
                errors.push(format!("seed {seed}: {e}"));
            }
        }
    }
    let nr = ok.first().map_or(0, |r| r.metrics.reward_gap.first().map_or(0, Vec::len));
    let len = ok.iter().map(|r| r.metrics.len()).min().unwrap_or(0);
    let mut gm = Vec::with_capacity(len);
    let mut gv = Vec::with_capacity(len);
    let mut nm = Vec::with_capacity(len);
    let mut nv = Vec::with_capacity(len);
    for t in 0..len {
        let mut mrow = Vec::with_capacity(nr);
        let mut vrow = Vec::with_capacity(nr);
        for i in 0..nr {
            let xs: Vec<f64> = ok.iter().map(|r| r.metrics.reward_gap[t][i]).collect();
            let (a, b) = mean_and_variance(&xs);
            mrow.push(a);
            vrow.push(b);
        }
        gm.push(mrow);
        gv.push(vrow);
        let xs: Vec<f64> = ok.iter().map(|r| r.metrics.normalized_reward[t]).collect();
        let (a, b) = mean_and_variance(&xs);
        nm.push(a);
        nv.push(b);
    }
    let policy_gap = ok.iter().filter_map(|r| r.lp_duality_gap).fold(0.0, f64::max);
    Summary {
        policy: policy.to_string(),
        horizon,
        lambda_star: ss.lambda,
        binding_rewards: ss.binding_rewards(BINDING_TOL),
        max_lp_duality_gap: ss.duality_gap.max(policy_gap),
        seeds: runs.iter().map(|r| r.0).collect(),
        complete: failed.is_empty(),
        failed_seeds: failed,
        errors,
        violations: ok.iter().map(|r| r.violations).sum(),
        per_seed: ok
            .iter()
            .map(|r| SeedResult {
                seed: r.seed,
                final_reward_gap: r.metrics.reward_gap.last().cloned().unwrap_or_default(),
                final_normalized_reward: r.metrics.normalized_reward.last().copied().unwrap_or(f64::NAN),
                violations: r.violations,
            })
            .collect(),
        reward_gap_mean: gm,
        reward_gap_variance: gv,
        normalized_reward_mean: nm,
        normalized_reward_variance: nv,
    }
}

const BINDING_TOL: f64 = 1e-7;

/// Solves the benchmark and simulates every seed, without touching disk.
pub fn evaluate(inst: &Instance, spec: &PolicySpec, horizon: usize, seeds: &[u64]) -> Result<Summary> {
    let ss = solve_lp_s(inst.model().as_ref(), inst.arrival_probs(), inst.capacities())?;
    Ok(evaluate_with(inst, &ss, spec, horizon, seeds))
}

pub fn evaluate_with(inst: &Instance, ss: &SteadyState, spec: &PolicySpec, horizon: usize, seeds: &[u64]) -> Summary {
    let runs: Vec<(u64, Result<SeedRun>)> = seeds
        .par_iter()
        .map(|&seed| (seed, run_seed(inst, spec, horizon, seed, ss.lambda, false)))
        .collect();
    summarize(spec.label(), ss, horizon, &runs)
}

/// Everything a run produced.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub summary: Summary,
    pub summary_path: PathBuf,
    pub metric_paths: Vec<PathBuf>,
}

/// Runs every seed against one instance. Seeds only drive arrivals,
/// outcomes and policy randomness; failed seeds are listed in the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let inst = cfg.build_instance()?;
    run_on_instance(cfg, &inst)
}

pub fn run_on_instance(cfg: &ExperimentConfig, inst: &Instance) -> Result<ExperimentOutput> {
    let ss = solve_lp_s(inst.model().as_ref(), inst.arrival_probs(), inst.capacities())?;
    let dir = cfg.resolved_output_dir();
    fs::create_dir_all(&dir)?;
    let label = cfg.policy.label();

    let runs: Vec<(u64, Result<SeedRun>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let res = run_seed(inst, &cfg.policy, cfg.horizon, seed, ss.lambda, cfg.write_trajectories).and_then(|mut run| {
                let path = dir.join(format!("{label}_seed{seed}_metrics.csv"));
                run.metrics.write_csv(BufWriter::new(File::create(path)?))?;
                if let Some(traj) = run.trajectory.take() {
                    let tp = dir.join(format!("{label}_seed{seed}_trajectory.csv"));
                    traj.write_csv(BufWriter::new(File::create(tp)?))?;
                }
                Ok(run)
            });
            (seed, res)
        })
        .collect();

    let metric_paths = runs
        .iter()
        .filter(|r| r.1.is_ok())
        .map(|r| dir.join(format!("{label}_seed{}_metrics.csv", r.0)))
        .collect();
    let summary = summarize(label, &ss, cfg.horizon, &runs);
    let summary_path = dir.join(format!("{label}_summary.json"));
    let mut f = BufWriter::new(File::create(&summary_path)?);
    serde_json::to_writer(&mut f, &summary)?;
    f.flush()?;
    Ok(ExperimentOutput {
        summary,
        summary_path,
        metric_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_variance() {
        let (m, v) = mean_and_variance(&[1.0, 3.0]);
        assert_eq!((m, v), (2.0, 1.0));
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "horizon = 50\n[instance]\nsource = \"synthetic\"\nn_customers = 3\n[policy]\nname = \"null\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.policy, PolicySpec::Null);
        assert!(ExperimentConfig::from_toml("horizon = 5\nfoo = 1\n[instance]\nsource = \"synthetic\"\n[policy]\nname = \"null\"\n").is_err());
    }
}
