//! Linear programs: representation, the in-repo simplex solver, builders for
//! the allocation benchmarks and their duals, and column generation.

mod builders;
mod colgen;
mod dual;
mod factor;
mod simplex;
pub mod text;

pub use builders::{
    build_lp_e, build_lp_rs, build_lp_s, empirical_distribution, LpELayout, LpSLayout,
    LP_E_MAX_COEFFS,
};
pub use colgen::{solve_lp_s_colgen, ColgenResult};
pub use dual::{build_dual, DualKind};
pub use simplex::Simplex;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub obj: f64,
    pub nonneg: bool,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    sense: Sense,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn maximize() -> Self {
        Self::new(Sense::Maximize)
    }

    pub fn minimize() -> Self {
        Self::new(Sense::Minimize)
    }

    pub fn add_var(&mut self, obj: f64, nonneg: bool) -> usize {
        self.vars.push(Variable {
            obj,
            nonneg,
            label: None,
        });
        self.vars.len() - 1
    }

    pub fn add_labeled_var(&mut self, obj: f64, nonneg: bool, label: impl Into<String>) -> usize {
        let v = self.add_var(obj, nonneg);
        self.vars[v].label = Some(label.into());
        v
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> usize {
        self.rows.push(Constraint {
            coeffs,
            cmp,
            rhs,
            label: None,
        });
        self.rows.len() - 1
    }

    pub fn add_labeled_row(
        &mut self,
        coeffs: Vec<(usize, f64)>,
        cmp: Cmp,
        rhs: f64,
        label: impl Into<String>,
    ) -> usize {
        let r = self.add_row(coeffs, cmp, rhs);
        self.rows[r].label = Some(label.into());
        r
    }

    pub fn set_var_label(&mut self, var: usize, label: impl Into<String>) {
        self.vars[var].label = Some(label.into());
    }

    pub fn set_row_label(&mut self, row: usize, label: impl Into<String>) {
        self.rows[row].label = Some(label.into());
    }

    /// Appends a coefficient to an existing row.
    pub fn push_coeff(&mut self, row: usize, var: usize, val: f64) {
        self.rows[row].coeffs.push((var, val));
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_coeffs(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if !v.obj.is_finite() {
                return Err(Error::NumericalFailure(format!("objective of var {i} not finite")));
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::NumericalFailure(format!("rhs of row {r} not finite")));
            }
            for &(v, a) in &row.coeffs {
                if v >= self.vars.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "variable",
                        index: v,
                        len: self.vars.len(),
                    });
                }
                if !a.is_finite() {
                    return Err(Error::NumericalFailure(format!("coefficient in row {r} not finite")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, x)| v.obj * x).sum()
    }

    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].coeffs.iter().map(|&(v, a)| a * x[v]).sum()
    }

    /// Largest violation of any row or sign restriction at `x`.
    pub fn max_primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, var) in self.vars.iter().enumerate() {
            if var.nonneg {
                worst = worst.max(-x[v]);
            }
        }
        for r in 0..self.rows.len() {
            let act = self.row_activity(r, x);
            let row = &self.rows[r];
            let viol = match row.cmp {
                Cmp::Le => act - row.rhs,
                Cmp::Ge => row.rhs - act,
                Cmp::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. `duals[r]` is the rate of change of the optimum in `rhs[r]`.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn duality_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub primal: f64,
    pub dual_feasibility: f64,
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            primal: 1e-8,
            dual_feasibility: 1e-7,
            gap: 1e-6,
        }
    }
}

/// Recomputes primal residuals, dual sign conditions, reduced costs and the
/// dual objective `b·y` from the program data alone.
pub fn check_certificate(lp: &LinearProgram, sol: &LpSolution) -> Result<()> {
    check_certificate_with(lp, sol, Tolerances::default())
}

pub fn check_certificate_with(lp: &LinearProgram, sol: &LpSolution, tol: Tolerances) -> Result<()> {
    if sol.primal.len() != lp.num_vars() || sol.duals.len() != lp.num_rows() {
        return Err(Error::DimensionMismatch("solution does not match program".into()));
    }
    let resid = lp.max_primal_residual(&sol.primal);
    if resid > tol.primal {
        return Err(Error::NumericalFailure(format!("primal residual {resid:.3e}")));
    }
    // Work in maximize form: y = duals for max, y = -duals for min.
    let s = match lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    for (r, row) in lp.rows.iter().enumerate() {
        let y = s * sol.duals[r];
        let bad = match row.cmp {
            Cmp::Le => y < -tol.dual_feasibility,
            Cmp::Ge => y > tol.dual_feasibility,
            Cmp::Eq => false,
        };
        if bad {
            return Err(Error::NumericalFailure(format!("dual sign of row {r}: {y:.3e}")));
        }
    }
    let mut reduced: Vec<f64> = lp.vars.iter().map(|v| s * v.obj).collect();
    for (r, row) in lp.rows.iter().enumerate() {
        let y = s * sol.duals[r];
        for &(v, a) in &row.coeffs {
            reduced[v] -= a * y;
        }
    }
    for (v, var) in lp.vars.iter().enumerate() {
        let d = reduced[v];
        let bad = if var.nonneg {
            d > tol.dual_feasibility
        } else {
            d.abs() > tol.dual_feasibility
        };
        if bad {
            return Err(Error::NumericalFailure(format!("reduced cost of var {v}: {d:.3e}")));
        }
    }
    let dual_obj: f64 = lp.rows.iter().zip(&sol.duals).map(|(r, y)| r.rhs * y).sum();
    let primal_obj = lp.objective_value(&sol.primal);
    if (primal_obj - dual_obj).abs() > tol.gap {
        return Err(Error::NumericalFailure(format!(
            "duality gap {:.3e} (primal {primal_obj}, dual {dual_obj})",
            (primal_obj - dual_obj).abs()
        )));
    }
    Ok(())
}

/// Solves `lp` and enforces the optimality certificate.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    simplex::solve(lp)
}

/// Dense LP-S is used up to this many `(j, k)` columns; beyond it the
/// program is solved by column generation with the model's own oracle.
pub const DENSE_LP_S_MAX_COLUMNS: usize = 20_000;

/// Optimum of the steady-state program and its optimal randomization.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub lambda: f64,
    pub duality_gap: f64,
    /// Per type, the actions with positive weight.
    pub allocation: Vec<Vec<(usize, f64)>>,
    /// `sum_j p_j sum_k w_ijk y_jk` per reward index.
    pub reward_levels: Vec<f64>,
    pub columns_generated: Option<usize>,
}

impl SteadyState {
    /// Reward indices whose row is tight at the optimum.
    pub fn binding_rewards(&self, tol: f64) -> Vec<usize> {
        (0..self.reward_levels.len())
            .filter(|&i| self.reward_levels[i] - self.lambda <= tol)
            .collect()
    }
}

fn reward_levels(model: &dyn crate::model::OutcomeModel, p: &[f64], allocation: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let mut levels = vec![0.0; model.dims().n_rewards];
    for (j, acts) in allocation.iter().enumerate() {
        for &(k, y) in acts {
            for (l, w) in levels.iter_mut().zip(model.means(j, k).w) {
                *l += p[j] * w * y;
            }
        }
    }
    levels
}

pub fn solve_lp_s(
    model: &dyn crate::model::OutcomeModel,
    p: &[f64],
    capacities: &[f64],
) -> Result<SteadyState> {
    let d = model.dims();
    let active = p.iter().filter(|&&x| x > 0.0).count();
    if active.saturating_mul(d.n_actions) <= DENSE_LP_S_MAX_COLUMNS {
        let (lp, layout) = build_lp_s(model, p, capacities)?;
        let sol = solve_lp(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::NumericalFailure(format!("LP-S is {:?}", sol.status)));
        }
        let allocation = layout.allocation(&sol, d.n_types);
        return Ok(SteadyState {
            lambda: sol.objective,
            duality_gap: sol.duality_gap(),
            reward_levels: reward_levels(model, p, &allocation),
            allocation,
            columns_generated: None,
        });
    }
    let res = solve_lp_s_colgen(model, p, capacities, |j, rho, alpha| model.kappa(j, rho, alpha))?;
    let allocation = res.layout.allocation(&res.solution, d.n_types);
    Ok(SteadyState {
        lambda: res.lambda(),
        duality_gap: res.solution.duality_gap(),
        reward_levels: reward_levels(model, p, &allocation),
        allocation,
        columns_generated: Some(res.layout.columns.len()),
    })
}
