//! Cross-module verification: exact benchmark values, bound sweeps against
//! independent oracles, duality audits and end-to-end synthetic runs.
//!
//! Every check reports what it measured; the end-to-end comparisons are
//! empirical and can fail without indicating a bug.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assortment::assortment_oracle;
use crate::error::{Error, Result};
use crate::experiment::{evaluate_with, generate_synthetic, Summary, SyntheticParams};
use crate::lp::{
    build_dual, build_lp_e, build_lp_rs, build_lp_s, empirical_distribution, solve_lp, solve_lp_s,
    solve_lp_s_colgen, DualKind, LinearProgram, LpSolution, LpStatus, SteadyState,
};
use crate::model::{gap_instance, Dims, Instance, InstanceParts, SupportPoint, TableModel};
use crate::mwu::mwu_regret_harness;
use crate::oracle::{dp_opt_ipc, enumerate_assortments};
use crate::policy::PolicySpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// Property checks at full size, end-to-end runs shortened.
    Quick,
    Full,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub elapsed: Duration,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<28} {} [{:.1?}]", self.name, self.measured, self.elapsed)
    }
}

fn timed<F: FnOnce() -> Result<(bool, String)>>(name: &'static str, limit: Option<Duration>, f: F) -> Check {
    let start = Instant::now();
    let res = f();
    let elapsed = start.elapsed();
    let (mut passed, mut measured) = match res {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(lim) = limit {
        if elapsed > lim {
            passed = false;
            measured.push_str(&format!("; over the {lim:?} budget"));
        }
    }
    Check {
        name,
        passed,
        measured,
        elapsed,
    }
}

// ---------------------------------------------------------------------------
// Instance generators

/// Random finite-support instance with two rewards, whole-unit allocations
/// in `0..=2`, durations in `0..=d_max` and capacities in `2..=6`. The null
/// type is last and the null action is `0`.
pub fn random_table(seed: u64, n_types: usize, n_actions: usize, n_resources: usize, d_max: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        n_rewards: 2,
        n_resources,
        n_types: n_types + 1,
        n_actions: n_actions + 1,
    };
    let mut entries = Vec::new();
    for j in 0..n_types {
        for k in 1..=n_actions {
            let n_pts = rng.random_range(1..=3);
            let pts = random_points(&mut rng, n_pts, |rng| {
                (
                    (0..2).map(|_| rng.random_range(0.0..1.0)).collect(),
                    (0..n_resources).map(|_| rng.random_range(0..=2) as f64).collect(),
                    (0..n_resources).map(|_| rng.random_range(0..=d_max)).collect(),
                )
            });
            entries.push((j, k, pts));
        }
    }
    let model = TableModel::new(dims, entries, n_types, 0).expect("generated table is valid");
    let p = random_probs(&mut rng, n_types);
    let caps = (0..n_resources).map(|_| rng.random_range(2..=6) as f64).collect();
    finish(model, p, caps, n_types)
}

/// Single-reward, single-resource instance small enough for the exact
/// program: two customer types, two actions, capacity at most 3, durations
/// at most 3.
pub fn tiny_table(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        n_rewards: 1,
        n_resources: 1,
        n_types: 3,
        n_actions: 3,
    };
    let mut entries = Vec::new();
    for j in 0..2 {
        for k in 1..=2 {
            let n_pts = rng.random_range(1..=2);
            let pts = random_points(&mut rng, n_pts, |rng| {
                (
                    vec![rng.random_range(0.0..1.0)],
                    vec![rng.random_range(1..=2) as f64],
                    vec![rng.random_range(1..=3)],
                )
            });
            entries.push((j, k, pts));
        }
    }
    let model = TableModel::new(dims, entries, 2, 0).expect("generated table is valid");
    let p = random_probs(&mut rng, 2);
    let caps = vec![rng.random_range(1..=3) as f64];
    finish(model, p, caps, 2)
}

type Point = (Vec<f64>, Vec<f64>, Vec<u32>);

fn random_points<F: FnMut(&mut ChaCha8Rng) -> Point>(rng: &mut ChaCha8Rng, n: usize, mut draw: F) -> Vec<SupportPoint> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter()
        .map(|r| {
            let (w, a, d) = draw(rng);
            SupportPoint { prob: r / s, w, a, d }
        })
        .collect()
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|r| r / s).collect();
    p.push(0.0);
    let fix = 1.0 - p.iter().sum::<f64>();
    p[0] += fix;
    p
}

fn finish(model: TableModel, p: Vec<f64>, caps: Vec<f64>, null_type: usize) -> Instance {
    Instance::new(InstanceParts {
        capacities: caps,
        arrival_probs: p,
        model: Arc::new(model),
        null_type: Some(null_type),
        null_action: Some(0),
        horizon_hint: None,
    })
    .expect("generated instance is valid")
}

/// Synthetic MNL instance with capacities `1 / xi`.
pub fn synthetic_instance(n_customers: usize, xi: f64, horizon: usize) -> Result<Instance> {
    let params = SyntheticParams {
        n_customers,
        xi,
        ..SyntheticParams::default()
    };
    Ok(generate_synthetic(&params, horizon)?.build()?.instance)
}

// ---------------------------------------------------------------------------
// Duality audit

/// Largest `|primal - dual|` seen over a run of solves. Each program is
/// checked twice: against `b·y` recomputed from the solver's multipliers,
/// and against the optimum of the separately built dual program.
#[derive(Clone, Debug, Default)]
pub struct DualityAudit {
    pub solves: usize,
    pub max_gap: f64,
    pub worst: String,
    /// Added to every returned multiplier before `b·y` is recomputed.
    pub tamper: f64,
}

impl DualityAudit {
    pub fn with_tamper(tamper: f64) -> Self {
        Self {
            tamper,
            ..Self::default()
        }
    }

    pub fn record(&mut self, what: &str, gap: f64) {
        self.solves += 1;
        if !(gap <= self.max_gap) {
            self.max_gap = gap;
            self.worst = what.to_string();
        }
    }

    /// Recomputes `b·y` from the program data.
    pub fn record_solution(&mut self, what: &str, lp: &LinearProgram, sol: &LpSolution) {
        let dual: f64 = lp.rows().iter().zip(&sol.duals).map(|(r, y)| r.rhs * (y + self.tamper)).sum();
        self.record(what, (lp.objective_value(&sol.primal) - dual).abs());
    }

    /// Solves `primal` and `dual` independently and records both routes.
    pub fn record_pair(&mut self, what: &str, primal: &LinearProgram, dual: &LinearProgram) -> Result<f64> {
        let p = optimal(primal)?;
        let d = optimal(dual)?;
        self.record_solution(what, primal, &p);
        self.record(what, (p.objective - d.objective).abs());
        Ok(p.objective)
    }

    pub fn record_summary(&mut self, what: &str, s: &Summary) {
        self.record(what, s.max_lp_duality_gap);
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_gap <= tol
    }
}

fn optimal(lp: &LinearProgram) -> Result<LpSolution> {
    let sol = solve_lp(lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure(format!("program is {:?}", sol.status)));
    }
    Ok(sol)
}

fn lp_s_pair(audit: &mut DualityAudit, what: &str, inst: &Instance) -> Result<f64> {
    let m = inst.model().as_ref();
    let (lp, _) = build_lp_s(m, inst.arrival_probs(), inst.capacities())?;
    let (dual, _) = build_dual(DualKind::LpS, m, inst.arrival_probs(), inst.capacities())?;
    audit.record_pair(what, &lp, &dual)
}

fn lp_e_pair(audit: &mut DualityAudit, what: &str, inst: &Instance, horizon: usize) -> Result<f64> {
    let m = inst.model().as_ref();
    let (lp, _) = build_lp_e(m, inst.arrival_probs(), inst.capacities(), horizon)?;
    let (dual, _) = build_dual(DualKind::LpE { horizon }, m, inst.arrival_probs(), inst.capacities())?;
    audit.record_pair(what, &lp, &dual)
}

// ---------------------------------------------------------------------------
// Property checks

pub const EXACT_TOL: f64 = 1e-9;
pub const SWEEP_TOL: f64 = 1e-8;
pub const DUALITY_TOL: f64 = 1e-6;
pub const ORACLE_TOL: f64 = 1e-6;

/// Both benchmarks on the `d = 8` two-action instance.
pub fn gap_instance_exactness(audit: &mut DualityAudit) -> Check {
    timed("gap instance", Some(Duration::from_secs(1)), || {
        let inst = gap_instance(8)?;
        let horizon = 4.0;
        let s = horizon * lp_s_pair(audit, "gap LP-S", &inst)?;
        let e = horizon * lp_e_pair(audit, "gap LP-E", &inst, 4)?;
        let ok = (s - 3.0).abs() <= EXACT_TOL && (e - 4.0).abs() <= EXACT_TOL && ((e - s) - 1.0).abs() <= EXACT_TOL;
        Ok((ok, format!("T*lambda = {s}, T*opt(LP-E) = {e}, gap = {}", e - s)))
    })
}

/// `T opt(LP-E) - d_max w_max <= T lambda <= T opt(LP-E)` on random tables.
pub fn expectation_bound_sweep(audit: &mut DualityAudit, n: u64) -> Check {
    timed("LP-E vs LP-S sweep", Some(Duration::from_secs(120)), || {
        let mut worst_upper = f64::NEG_INFINITY;
        let mut worst_lower = f64::NEG_INFINITY;
        let mut bad = 0;
        for seed in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + seed);
            let inst = random_table(
                seed,
                rng.random_range(1..=3),
                rng.random_range(1..=3),
                rng.random_range(1..=2),
                rng.random_range(1..=4),
            );
            let horizon = rng.random_range(1..=20usize);
            let t = horizon as f64;
            let s = t * lp_s_pair(audit, "sweep LP-S", &inst)?;
            let e = t * lp_e_pair(audit, "sweep LP-E", &inst, horizon)?;
            let sb = inst.model().support_bounds();
            let slack = sb.d_max as f64 * sb.w_max;
            worst_upper = worst_upper.max(s - e);
            worst_lower = worst_lower.max(e - slack - s);
            if s > e + SWEEP_TOL || e - slack > s + SWEEP_TOL {
                bad += 1;
            }
        }
        Ok((
            bad == 0,
            format!("{n} instances, {bad} violations, max(T*lambda - T*LP-E) = {worst_upper:.2e}, max(T*LP-E - slack - T*lambda) = {worst_lower:.3}"),
        ))
    })
}

/// `opt(LP-E) >= exact dynamic optimum` per step on tiny instances.
pub fn expectation_dominates_dp(audit: &mut DualityAudit, n: u64) -> Check {
    timed("LP-E vs exact DP", Some(Duration::from_secs(120)), || {
        let mut bad = 0;
        let mut min_margin = f64::INFINITY;
        for seed in 0..n {
            let inst = tiny_table(seed);
            let horizon = 1 + (seed as usize % 8);
            let dp = dp_opt_ipc(&inst, horizon)?;
            let e = lp_e_pair(audit, "tiny LP-E", &inst, horizon)?;
            min_margin = min_margin.min(e - dp.per_step());
            if e < dp.per_step() - EXACT_TOL {
                bad += 1;
            }
        }
        Ok((bad == 0, format!("{n} instances, {bad} violations, min(LP-E - DP) = {min_margin:.3e}")))
    })
}

/// Regret inequality on random bounded loss sequences.
pub fn mwu_regret(n: u64) -> Check {
    timed("MWU regret", Some(Duration::from_secs(120)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4e67);
        let mut bad = 0;
        let mut min_margin = f64::INFINITY;
        for _ in 0..n {
            let coords = rng.random_range(1..=8usize);
            let b = rng.random_range(0.05..=4.0);
            let tau = rng.random_range(1..=2048usize);
            let adversarial = rng.random_bool(0.5);
            let losses: Vec<Vec<f64>> = (0..tau)
                .map(|s| {
                    (0..coords)
                        .map(|i| {
                            if adversarial {
                                // Alternating leader to defeat follow-the-leader.
                                if (s + i) % 2 == 0 { b } else { -b }
                            } else {
                                rng.random_range(-b..=b)
                            }
                        })
                        .collect()
                })
                .collect();
            let rep = mwu_regret_harness(&losses, b);
            let lo = rep.coordinate_avg.iter().copied().fold(f64::INFINITY, f64::min);
            min_margin = min_margin.min(lo - (rep.weighted_avg - rep.slack));
            if !rep.holds(1e-12) {
                bad += 1;
            }
        }
        Ok((bad == 0, format!("{n} sequences, {bad} violations, min margin = {min_margin:.3e}")))
    })
}

/// Assortment LP against exhaustive search.
pub fn assortment_oracle_agreement(n: u64) -> Check {
    timed("assortment oracle", Some(Duration::from_secs(60)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa550);
        let mut bad = 0;
        let mut worst = 0.0f64;
        for _ in 0..n {
            let products = rng.random_range(1..=10usize);
            let max_size = rng.random_range(1..=4usize);
            let u: Vec<f64> = (0..products).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
            let rho: Vec<f64> = (0..products).map(|_| rng.random_range(-1.0..3.0)).collect();
            let (set, val) = assortment_oracle(&u, &rho, max_size)?;
            let (_, best) = enumerate_assortments(&u, &rho, max_size)?;
            let denom = 1.0 + set.iter().map(|&i| u[i]).sum::<f64>();
            let attained = set.iter().map(|&i| rho[i] * u[i]).sum::<f64>() / denom;
            let err = (val - best).abs().max((attained - best).abs());
            worst = worst.max(err);
            if err > ORACLE_TOL || set.len() > max_size {
                bad += 1;
            }
        }
        Ok((bad == 0, format!("{n} instances, {bad} mismatches, max error = {worst:.2e}")))
    })
}

/// Column generation against the dense program on a full-size action set.
pub fn colgen_equivalence(audit: &mut DualityAudit, n_customers: usize) -> Check {
    timed("column generation", Some(Duration::from_secs(60)), || {
        let inst = synthetic_instance(n_customers, 1.0 / 20.0, 10_000)?;
        let m = inst.model().clone();
        let (lp, _) = build_lp_s(m.as_ref(), inst.arrival_probs(), inst.capacities())?;
        let dense = optimal(&lp)?;
        audit.record_solution("dense LP-S", &lp, &dense);
        let cg = solve_lp_s_colgen(m.as_ref(), inst.arrival_probs(), inst.capacities(), |j, r, a| m.kappa(j, r, a))?;
        audit.record_solution("colgen LP-S", &cg.program, &cg.solution);
        let diff = (cg.lambda() - dense.objective).abs();
        Ok((
            diff <= ORACLE_TOL,
            format!(
                "|K| = {}, |J| = {n_customers}, dense {:.9} vs colgen {:.9} ({} columns), diff {diff:.2e}",
                inst.n_actions(),
                dense.objective,
                cg.lambda(),
                cg.layout.columns.len()
            ),
        ))
    })
}

/// LP-S, LP-RS and LP-E with their explicit duals on random tables.
pub fn duality_sweep(audit: &mut DualityAudit, n: u64) -> Result<()> {
    for seed in 0..n {
        let inst = random_table(1000 + seed, 3, 4, 2, 3);
        lp_s_pair(audit, "LP-S", &inst)?;
        lp_e_pair(audit, "LP-E", &inst, 6)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let window: Vec<usize> = (0..40).map(|_| rng.random_range(0..inst.n_types())).collect();
        let p = empirical_distribution(&window, inst.n_types())?;
        let m = inst.model().as_ref();
        let (lp, _) = build_lp_rs(m, &p, inst.capacities())?;
        let (dual, _) = build_dual(DualKind::LpRs, m, &p, inst.capacities())?;
        audit.record_pair("LP-RS", &lp, &dual)?;
    }
    Ok(())
}

pub fn strong_duality(audit: &DualityAudit) -> Check {
    let start = Instant::now();
    Check {
        name: "strong duality",
        passed: audit.holds(DUALITY_TOL) && audit.solves > 0,
        measured: format!("{} solves, max |primal - dual| = {:.2e} ({})", audit.solves, audit.max_gap, audit.worst),
        elapsed: start.elapsed(),
    }
}

// ---------------------------------------------------------------------------
// End-to-end runs

#[derive(Clone, Debug)]
pub struct EndToEndPlan {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub n_customers: usize,
    pub j_sweep: Vec<usize>,
    pub xi_pair: (f64, f64),
}

impl EndToEndPlan {
    pub fn for_level(level: Level) -> Self {
        match level {
            Level::Full => Self {
                horizon: 10_000,
                seeds: (0..10).collect(),
                n_customers: 1000,
                j_sweep: vec![100, 400, 1000],
                xi_pair: (1.0 / 20.0, 1.0 / 200.0),
            },
            Level::Quick => Self {
                horizon: 2_000,
                seeds: (0..3).collect(),
                n_customers: 100,
                j_sweep: vec![50, 100],
                xi_pair: (1.0 / 20.0, 1.0 / 200.0),
            },
        }
    }
}

/// Summaries for one capacity level.
#[derive(Clone, Debug)]
pub struct CapacityRuns {
    pub xi: f64,
    pub steady_state: SteadyState,
    pub imwu: Summary,
    pub osa: Summary,
    pub greedy: Summary,
    pub null: Summary,
}

#[derive(Clone, Debug)]
pub struct EndToEnd {
    pub plan: EndToEndPlan,
    pub loose: CapacityRuns,
    pub tight: CapacityRuns,
    /// `(|J|, iMWU summary)` at the tight capacity level.
    pub sweep: Vec<(usize, Summary)>,
    pub elapsed: Duration,
}

impl EndToEnd {
    pub fn all_summaries(&self) -> Vec<&Summary> {
        let mut v = Vec::new();
        for r in [&self.loose, &self.tight] {
            v.extend([&r.imwu, &r.osa, &r.greedy, &r.null]);
        }
        v.extend(self.sweep.iter().map(|s| &s.1));
        v
    }
}

fn capacity_runs(plan: &EndToEndPlan, n_customers: usize, xi: f64) -> Result<CapacityRuns> {
    let inst = synthetic_instance(n_customers, xi, plan.horizon)?;
    let ss = solve_lp_s(inst.model().as_ref(), inst.arrival_probs(), inst.capacities())?;
    let run = |spec: PolicySpec| evaluate_with(&inst, &ss, &spec, plan.horizon, &plan.seeds);
    Ok(CapacityRuns {
        xi,
        imwu: run(PolicySpec::Imwu { delta: 0.1 }),
        osa: run(PolicySpec::Osa { eta_bar: None }),
        greedy: run(PolicySpec::Greedy),
        null: run(PolicySpec::Null),
        steady_state: ss,
    })
}

pub fn run_end_to_end(plan: &EndToEndPlan) -> Result<EndToEnd> {
    let start = Instant::now();
    let loose = capacity_runs(plan, plan.n_customers, plan.xi_pair.0)?;
    let tight = capacity_runs(plan, plan.n_customers, plan.xi_pair.1)?;
    let mut sweep = Vec::new();
    for &nj in &plan.j_sweep {
        if nj == plan.n_customers {
            sweep.push((nj, tight.imwu.clone()));
            continue;
        }
        let inst = synthetic_instance(nj, plan.xi_pair.1, plan.horizon)?;
        let ss = solve_lp_s(inst.model().as_ref(), inst.arrival_probs(), inst.capacities())?;
        sweep.push((nj, evaluate_with(&inst, &ss, &PolicySpec::Imwu { delta: 0.1 }, plan.horizon, &plan.seeds)));
    }
    Ok(EndToEnd {
        plan: plan.clone(),
        loose,
        tight,
        sweep,
        elapsed: start.elapsed(),
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Exact occupancy check over every run.
pub fn hard_feasibility(e2e: &EndToEnd) -> Check {
    let all = e2e.all_summaries();
    let violations: usize = all.iter().map(|s| s.violations).sum();
    let failed: usize = all.iter().map(|s| s.failed_seeds.len()).sum();
    let runs: usize = all.iter().map(|s| s.per_seed.len()).sum();
    Check {
        name: "hard feasibility",
        passed: violations == 0 && failed == 0,
        measured: format!("{runs} runs at T = {}, {violations} violations, {failed} failed seeds", e2e.plan.horizon),
        elapsed: e2e.elapsed,
    }
}

/// Mean final iMWU reward gaps shrink on every binding objective when
/// capacity grows; revenue gap negative and sales gaps positive at the
/// larger capacity.
pub fn capacity_monotonicity(e2e: &EndToEnd) -> Check {
    let lo = e2e.loose.imwu.final_reward_gap_mean();
    let hi = e2e.tight.imwu.final_reward_gap_mean();
    let mut binding = e2e.loose.steady_state.binding_rewards(1e-7);
    binding.extend(e2e.tight.steady_state.binding_rewards(1e-7));
    binding.sort_unstable();
    binding.dedup();
    let ordered = !binding.is_empty() && binding.iter().all(|&i| hi[i] < lo[i]);
    let signs = hi.len() == 3 && hi[0] < 0.0 && hi[1] > 0.0 && hi[2] > 0.0;
    Check {
        name: "capacity monotonicity",
        passed: ordered && signs,
        measured: format!(
            "binding {binding:?}; gap at xi = {:.4}: {}, at xi = {:.4}: {}; ordering {}, signs {}",
            e2e.loose.xi,
            fmt_vec(&lo),
            e2e.tight.xi,
            fmt_vec(&hi),
            if ordered { "ok" } else { "violated" },
            if signs { "ok" } else { "violated" }
        ),
        elapsed: Duration::ZERO,
    }
}

/// Final normalized reward of iMWU within 10% of OSA at the larger capacity.
pub fn imwu_tracks_osa(e2e: &EndToEnd) -> Check {
    let a = e2e.tight.imwu.final_normalized_reward_mean();
    let b = e2e.tight.osa.final_normalized_reward_mean();
    let rel = (a - b).abs() / b.abs();
    Check {
        name: "iMWU vs OSA",
        passed: rel <= 0.10,
        measured: format!("iMWU {a:.4}, OSA {b:.4}, relative difference {rel:.3}"),
        elapsed: Duration::ZERO,
    }
}

/// Final reward gaps vary by less than 0.05 across customer-type counts.
pub fn customer_count_independence(e2e: &EndToEnd) -> Check {
    let gaps: Vec<(usize, Vec<f64>)> = e2e.sweep.iter().map(|(n, s)| (*n, s.final_reward_gap_mean())).collect();
    let nr = gaps.first().map_or(0, |g| g.1.len());
    let spread: Vec<f64> = (0..nr)
        .map(|i| {
            let xs = gaps.iter().map(|g| g.1[i]);
            xs.clone().fold(f64::NEG_INFINITY, f64::max) - xs.fold(f64::INFINITY, f64::min)
        })
        .collect();
    let worst = spread.iter().copied().fold(0.0, f64::max);
    let detail: Vec<String> = gaps.iter().map(|(n, g)| format!("|J| = {n}: {}", fmt_vec(g))).collect();
    Check {
        name: "|J| independence",
        passed: gaps.len() >= 2 && worst < 0.05,
        measured: format!("{}; max spread {worst:.4}", detail.join(", ")),
        elapsed: Duration::ZERO,
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub level: Level,
    /// Perturbation applied to recorded multipliers; nonzero makes the
    /// duality check fail.
    pub dual_tamper: f64,
    pub colgen_customers: usize,
}

impl SuiteOptions {
    pub fn new(level: Level) -> Self {
        Self {
            level,
            dual_tamper: 0.0,
            colgen_customers: 20,
        }
    }
}

#[derive(Debug)]
pub struct Report {
    pub level: Level,
    pub checks: Vec<Check>,
    pub end_to_end: Option<EndToEnd>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs every check. Progress lines go to `log` as each check finishes.
pub fn run_suite(opts: &SuiteOptions, mut log: impl FnMut(&Check)) -> Result<Report> {
    let mut audit = DualityAudit::with_tamper(opts.dual_tamper);
    let mut checks = Vec::new();
    let mut push = |c: Check, checks: &mut Vec<Check>| {
        log(&c);
        checks.push(c);
    };
    push(gap_instance_exactness(&mut audit), &mut checks);
    push(expectation_bound_sweep(&mut audit, 100), &mut checks);
    push(expectation_dominates_dp(&mut audit, 50), &mut checks);
    push(mwu_regret(1000), &mut checks);
    push(assortment_oracle_agreement(200), &mut checks);
    push(colgen_equivalence(&mut audit, opts.colgen_customers), &mut checks);
    duality_sweep(&mut audit, 20)?;

    let e2e = run_end_to_end(&EndToEndPlan::for_level(opts.level))?;
    for s in e2e.all_summaries() {
        audit.record_summary("end-to-end", s);
    }
    push(hard_feasibility(&e2e), &mut checks);
    push(capacity_monotonicity(&e2e), &mut checks);
    push(imwu_tracks_osa(&e2e), &mut checks);
    push(customer_count_independence(&e2e), &mut checks);
    push(strong_duality(&audit), &mut checks);
    Ok(Report {
        level: opts.level,
        checks,
        end_to_end: Some(e2e),
    })
}
