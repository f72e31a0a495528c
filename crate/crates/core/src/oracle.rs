//! Exact ground truth for tiny instances: backward induction over the
//! occupancy profile, and exhaustive assortment search.

use std::collections::HashMap;

use crate::assortment::enumerate_subsets;
use crate::error::{Error, Result};
use crate::lp::{build_lp_e, solve_lp, LpStatus};
use crate::model::{Instance, TableModel};

pub const MAX_DP_STATES: f64 = 1e7;
pub const MAX_ENUMERATED_ASSORTMENTS: usize = 1_000_000;

/// Size limits for the exact program.
#[derive(Clone, Copy, Debug)]
pub struct TinyInstanceGuard {
    pub max_horizon: usize,
    pub max_capacity: f64,
    pub max_duration: u32,
    pub max_support: usize,
    pub max_types: usize,
    pub max_actions: usize,
}

impl Default for TinyInstanceGuard {
    fn default() -> Self {
        Self {
            max_horizon: 8,
            max_capacity: 3.0,
            max_duration: 3,
            max_support: 3,
            max_types: 3,
            max_actions: 3,
        }
    }
}

impl TinyInstanceGuard {
    /// Checks the limits and returns the table behind the instance and an
    /// upper bound on the number of states.
    pub fn check<'a>(&self, inst: &'a Instance, horizon: usize) -> Result<(&'a TableModel, f64)> {
        let fail = |m: String| Err(Error::GuardViolation(m));
        let Some(table) = inst.model().as_table() else {
            return fail("exact program needs a finite outcome table".into());
        };
        let d = inst.dims();
        if d.n_rewards != 1 {
            return fail(format!("{} reward indices, exactly 1 supported", d.n_rewards));
        }
        if horizon == 0 || horizon > self.max_horizon {
            return fail(format!("horizon {horizon}"));
        }
        if d.n_types > self.max_types || d.n_actions > self.max_actions {
            return fail(format!("{} types and {} actions", d.n_types, d.n_actions));
        }
        if inst.capacities().iter().any(|&c| c > self.max_capacity) {
            return fail("capacity too large".into());
        }
        let mut d_max = 0;
        for j in 0..d.n_types {
            for k in 0..d.n_actions {
                let pts = table.support(j, k);
                if pts.len() > self.max_support {
                    return fail(format!("support of ({j}, {k}) has {} points", pts.len()));
                }
                for pt in pts {
                    if pt.a.iter().any(|a| a.fract() != 0.0) {
                        return fail("allocations must be whole units".into());
                    }
                    d_max = d_max.max(pt.d.iter().copied().max().unwrap_or(0));
                }
            }
        }
        if d_max > self.max_duration {
            return fail(format!("duration {d_max}"));
        }
        let per_resource: f64 = inst
            .capacities()
            .iter()
            .map(|&c| (c.floor() + 1.0).powi(d_max as i32))
            .product();
        let states = horizon as f64 * per_resource;
        if states > MAX_DP_STATES {
            return fail(format!("{states} states"));
        }
        Ok((table, states))
    }
}

/// Exact optimum of the expected total reward over non-anticipatory policies.
#[derive(Clone, Debug)]
pub struct DpValue {
    pub total: f64,
    pub horizon: usize,
    /// Optimal action keyed by `(t, occupancy profile, arrival type)`.
    pub actions: HashMap<(usize, Vec<u8>, usize), usize>,
}

impl DpValue {
    pub fn per_step(&self) -> f64 {
        self.total / self.horizon as f64
    }
}

struct Dp<'a> {
    inst: &'a Instance,
    table: &'a TableModel,
    horizon: usize,
    d_max: usize,
    memo: HashMap<(usize, Vec<u8>), f64>,
    actions: HashMap<(usize, Vec<u8>, usize), usize>,
}

impl Dp<'_> {
    // Profile layout: resource i, bucket r (0-based) holds units released
    // at the start of step t + r + 1.
    fn occupied(&self, prof: &[u8], i: usize) -> u32 {
        prof[i * self.d_max..(i + 1) * self.d_max].iter().map(|&x| x as u32).sum()
    }

    fn value(&mut self, t: usize, prof: Vec<u8>) -> f64 {
        if t > self.horizon {
            return 0.0;
        }
        if let Some(&v) = self.memo.get(&(t, prof.clone())) {
            return v;
        }
        let d = self.inst.dims();
        let mut total = 0.0;
        for j in 0..d.n_types {
            let pj = self.inst.arrival_probs()[j];
            if pj == 0.0 {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_k = self.inst.null_action();
            for k in 0..d.n_actions {
                let pts: Vec<_> = if j == self.inst.null_type() || k == self.inst.null_action() {
                    Vec::new()
                } else {
                    self.table.support(j, k).to_vec()
                };
                let feasible = pts.iter().all(|pt| {
                    (0..d.n_resources).all(|i| {
                        pt.d[i] == 0
                            || self.occupied(&prof, i) as f64 + pt.a[i] <= self.inst.capacities()[i]
                    })
                });
                if !feasible {
                    continue;
                }
                let val = if pts.is_empty() {
                    self.value(t + 1, self.shift(&prof))
                } else {
                    let mut acc = 0.0;
                    for pt in &pts {
                        let mut next = prof.clone();
                        for i in 0..d.n_resources {
                            if pt.d[i] > 0 && pt.a[i] > 0.0 {
                                next[i * self.d_max + pt.d[i] as usize - 1] += pt.a[i] as u8;
                            }
                        }
                        acc += pt.prob * (pt.w[0] + self.value(t + 1, self.shift(&next)));
                    }
                    acc
                };
                if val > best + 1e-12 {
                    best = val;
                    best_k = k;
                }
            }
            self.actions.insert((t, prof.clone(), j), best_k);
            total += pj * best;
        }
        self.memo.insert((t, prof), total);
        total
    }

    fn shift(&self, prof: &[u8]) -> Vec<u8> {
        let mut next = vec![0u8; prof.len()];
        for i in 0..prof.len() / self.d_max {
            for r in 1..self.d_max {
                next[i * self.d_max + r - 1] = prof[i * self.d_max + r];
            }
        }
        next
    }
}

/// Backward induction for single-reward tiny instances.
pub fn dp_opt_ipc(inst: &Instance, horizon: usize) -> Result<DpValue> {
    dp_opt_ipc_with(inst, horizon, TinyInstanceGuard::default())
}

pub fn dp_opt_ipc_with(inst: &Instance, horizon: usize, guard: TinyInstanceGuard) -> Result<DpValue> {
    let (table, _) = guard.check(inst, horizon)?;
    let d_max = inst.model().support_bounds().d_max.max(1) as usize;
    let mut dp = Dp {
        inst,
        table,
        horizon,
        d_max,
        memo: HashMap::new(),
        actions: HashMap::new(),
    };
    let total = dp.value(1, vec![0; inst.n_resources() * d_max]);
    Ok(DpValue {
        total,
        horizon,
        actions: dp.actions,
    })
}

/// Per-step values of both sides of `opt(LP-E) >= opt(IP-C)`.
#[derive(Clone, Copy, Debug)]
pub struct FluidBoundCheck {
    pub lp_e: f64,
    pub dp: f64,
    pub duality_gap: f64,
}

impl FluidBoundCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lp_e >= self.dp - tol
    }
}

pub fn verify_fluid_bound(inst: &Instance, horizon: usize) -> Result<FluidBoundCheck> {
    let dp = dp_opt_ipc(inst, horizon)?;
    let (lp, _) = build_lp_e(inst.model().as_ref(), inst.arrival_probs(), inst.capacities(), horizon)?;
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure(format!("LP-E is {:?}", sol.status)));
    }
    Ok(FluidBoundCheck {
        lp_e: sol.objective,
        dp: dp.per_step(),
        duality_gap: sol.duality_gap(),
    })
}

/// Best assortment of size at most `max_size` for `sum_i rho_i q_i`, by
/// exhaustive search. Ties keep the earliest subset in enumeration order.
pub fn enumerate_assortments(u: &[f64], rho: &[f64], max_size: usize) -> Result<(Vec<usize>, f64)> {
    if u.len() != rho.len() {
        return Err(Error::DimensionMismatch("utilities and coefficients".into()));
    }
    let count: f64 = (0..=max_size.min(u.len())).map(|r| binom(u.len(), r)).sum();
    if count > MAX_ENUMERATED_ASSORTMENTS as f64 {
        return Err(Error::TooLarge(format!("{count} assortments")));
    }
    let mut best = (Vec::new(), 0.0);
    for set in enumerate_subsets(u.len(), max_size) {
        let denom = 1.0 + set.iter().map(|&i| u[i]).sum::<f64>();
        let val = set.iter().map(|&i| rho[i] * u[i]).sum::<f64>() / denom;
        if val > best.1 {
            best = (set, val);
        }
    }
    Ok(best)
}

fn binom(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
