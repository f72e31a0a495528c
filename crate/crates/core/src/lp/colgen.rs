//! Column generation for the steady-state program when the action set is
//! too large to enumerate.
//!
//! The restricted master starts with `λ` alone (the null action is implicit
//! in the `≤ 1` type rows). With duals `ρ = -y_reward ≥ 0`, `α = y_resource`
//! and `β = y_type`, the reduced cost of `y_jk` is
//! `p_j (ρ·w_jk − α·v_jk) − β_j`, so pricing type `j` is one call of the
//! supplied argmax oracle.

use std::collections::HashSet;

use super::builders::{lp_s_column, lp_s_skeleton, LpSLayout};
use super::simplex::Simplex;
use super::{check_certificate, LinearProgram, LpSolution, LpStatus};
use crate::error::{Error, Result};
use crate::model::{check_probability_vector, dot, OutcomeModel};

const REDUCED_COST_TOL: f64 = 1e-9;
const MAX_ROUNDS: usize = 10_000;

pub struct ColgenResult {
    pub solution: LpSolution,
    pub program: LinearProgram,
    pub layout: LpSLayout,
    pub rounds: usize,
}

impl ColgenResult {
    pub fn lambda(&self) -> f64 {
        self.solution.objective
    }
}

/// `pricing(j, rho, alpha)` must return an action maximizing `rho·w_jk − alpha·v_jk`.
pub fn solve_lp_s_colgen<F>(
    model: &dyn OutcomeModel,
    p: &[f64],
    capacities: &[f64],
    mut pricing: F,
) -> Result<ColgenResult>
where
    F: FnMut(usize, &[f64], &[f64]) -> Result<usize>,
{
    let d = model.dims();
    if p.len() != d.n_types || capacities.len() != d.n_resources {
        return Err(Error::DimensionMismatch("column generation data".into()));
    }
    check_probability_vector(p, d.n_types)?;
    let (mut program, mut layout) = lp_s_skeleton(d.n_rewards, capacities, p);
    let mut master = Simplex::new(&program)?;
    let mut present: HashSet<(usize, usize)> = HashSet::new();
    let active: Vec<usize> = (0..d.n_types).filter(|&j| layout.type_rows[j].is_some()).collect();

    for round in 1..=MAX_ROUNDS {
        let sol = master.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::NumericalFailure(format!("restricted master is {:?}", sol.status)));
        }
        let rho: Vec<f64> = layout.reward_rows.iter().map(|&r| (-sol.duals[r]).max(0.0)).collect();
        let alpha: Vec<f64> = layout.resource_rows.iter().map(|&r| sol.duals[r].max(0.0)).collect();

        let mut added = 0;
        for &j in &active {
            let k = pricing(j, &rho, &alpha)?;
            if k >= d.n_actions {
                return Err(Error::OracleFailure(format!("pricing returned action {k} of {}", d.n_actions)));
            }
            if present.contains(&(j, k)) {
                continue;
            }
            let beta = sol.duals[layout.type_rows[j].expect("active type")];
            let m = model.means(j, k);
            let reduced = p[j] * (dot(&rho, &m.w) - dot(&alpha, &m.v)) - beta;
            if reduced <= REDUCED_COST_TOL {
                continue;
            }
            let Some(entries) = lp_s_column(model, &layout, p, j, k) else {
                continue;
            };
            let var = program.add_labeled_var(0.0, true, format!("y[{j},{k}]"));
            for &(r, a) in &entries {
                program.push_coeff(r, var, a);
            }
            let internal = master.add_column(0.0, true, entries)?;
            debug_assert_eq!(internal, var);
            layout.columns.push((j, k, var));
            present.insert((j, k));
            added += 1;
        }
        if added == 0 {
            check_certificate(&program, &sol)?;
            return Ok(ColgenResult {
                solution: sol,
                program,
                layout,
                rounds: round,
            });
        }
    }
    Err(Error::NonTermination(MAX_ROUNDS))
}
