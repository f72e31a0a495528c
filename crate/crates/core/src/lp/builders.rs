//! The steady-state program, its sample-average version, and the
//! horizon-expanded expectation program.

use super::{Cmp, LinearProgram, LpSolution};
use crate::error::{Error, Result};
use crate::model::{check_probability_vector, OutcomeModel};

/// Upper limit on `T * |I_c| * |J| * |K|` for the expectation program.
pub const LP_E_MAX_COEFFS: u128 = 10_000_000;

/// Where things live in a steady-state program.
#[derive(Clone, Debug)]
pub struct LpSLayout {
    pub lambda: usize,
    /// `(j, k, variable)` for every generated `y_jk`.
    pub columns: Vec<(usize, usize, usize)>,
    pub reward_rows: Vec<usize>,
    pub resource_rows: Vec<usize>,
    /// Type row per type, absent when `p_j = 0`.
    pub type_rows: Vec<Option<usize>>,
}

impl LpSLayout {
    /// Positive `y_jk` grouped by type.
    pub fn allocation(&self, sol: &LpSolution, n_types: usize) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); n_types];
        for &(j, k, var) in &self.columns {
            let y = sol.primal[var];
            if y > 1e-12 {
                out[j].push((k, y));
            }
        }
        out
    }
}

/// Empirical frequencies of `window` over `n_types` types.
pub fn empirical_distribution(window: &[usize], n_types: usize) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::EmptySampleWindow);
    }
    let mut counts = vec![0usize; n_types];
    for &j in window {
        if j >= n_types {
            return Err(Error::IndexOutOfRange {
                what: "type",
                index: j,
                len: n_types,
            });
        }
        counts[j] += 1;
    }
    let n = window.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

pub(crate) fn lp_s_skeleton(n_rewards: usize, capacities: &[f64], p: &[f64]) -> (LinearProgram, LpSLayout) {
    let mut lp = LinearProgram::maximize();
    let lambda = lp.add_labeled_var(1.0, true, "lambda");
    let reward_rows = (0..n_rewards)
        .map(|i| lp.add_labeled_row(vec![(lambda, -1.0)], Cmp::Ge, 0.0, format!("reward[{i}]")))
        .collect();
    let resource_rows = capacities
        .iter()
        .enumerate()
        .map(|(i, &c)| lp.add_labeled_row(Vec::new(), Cmp::Le, c, format!("resource[{i}]")))
        .collect();
    let type_rows = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| (pj > 0.0).then(|| lp.add_labeled_row(Vec::new(), Cmp::Le, 1.0, format!("type[{j}]"))))
        .collect();
    (
        lp,
        LpSLayout {
            lambda,
            columns: Vec::new(),
            reward_rows,
            resource_rows,
            type_rows,
        },
    )
}

/// Sparse entries of the `y_jk` column, or `None` for an all-zero action.
pub(crate) fn lp_s_column(
    model: &dyn OutcomeModel,
    layout: &LpSLayout,
    p: &[f64],
    j: usize,
    k: usize,
) -> Option<Vec<(usize, f64)>> {
    let type_row = layout.type_rows[j]?;
    let m = model.means(j, k);
    if m.w.iter().chain(&m.v).all(|&x| x == 0.0) {
        return None;
    }
    let pj = p[j];
    let mut entries = Vec::with_capacity(m.w.len() + m.v.len() + 1);
    for (i, &w) in m.w.iter().enumerate() {
        if w != 0.0 {
            entries.push((layout.reward_rows[i], pj * w));
        }
    }
    for (i, &v) in m.v.iter().enumerate() {
        if v != 0.0 {
            entries.push((layout.resource_rows[i], pj * v));
        }
    }
    entries.push((type_row, 1.0));
    Some(entries)
}

fn check_shapes(model: &dyn OutcomeModel, p: &[f64], capacities: &[f64]) -> Result<()> {
    let d = model.dims();
    if capacities.len() != d.n_resources {
        return Err(Error::DimensionMismatch(format!(
            "{} capacities for {} resources",
            capacities.len(),
            d.n_resources
        )));
    }
    if p.len() != d.n_types {
        return Err(Error::DimensionMismatch(format!("{} probabilities for {} types", p.len(), d.n_types)));
    }
    Ok(())
}

/// max λ s.t. Σ p w y ≥ λ (rewards), Σ p v y ≤ c (resources), Σ_k y_jk ≤ 1 (types), y ≥ 0.
///
/// Types with `p_j = 0` and actions with all-zero means get no column.
pub fn build_lp_s(model: &dyn OutcomeModel, p: &[f64], capacities: &[f64]) -> Result<(LinearProgram, LpSLayout)> {
    check_shapes(model, p, capacities)?;
    check_probability_vector(p, p.len())?;
    let d = model.dims();
    let (mut lp, mut layout) = lp_s_skeleton(d.n_rewards, capacities, p);
    for j in 0..d.n_types {
        for k in 0..d.n_actions {
            if let Some(entries) = lp_s_column(model, &layout, p, j, k) {
                let var = lp.add_labeled_var(0.0, true, format!("y[{j},{k}]"));
                for (r, a) in entries {
                    lp.push_coeff(r, var, a);
                }
                layout.columns.push((j, k, var));
            }
        }
    }
    Ok((lp, layout))
}

/// The steady-state program with the empirical distribution `p_hat`.
pub fn build_lp_rs(
    model: &dyn OutcomeModel,
    p_hat: &[f64],
    capacities: &[f64],
) -> Result<(LinearProgram, LpSLayout)> {
    build_lp_s(model, p_hat, capacities)
}

#[derive(Clone, Debug)]
pub struct LpELayout {
    pub lambda: usize,
    /// `(t, j, k, variable)`, `t` starting at 1.
    pub columns: Vec<(usize, usize, usize, usize)>,
    pub reward_rows: Vec<usize>,
    /// `resource_rows[t - 1][i]`.
    pub resource_rows: Vec<Vec<usize>>,
}

/// max λ s.t. Σ_t Σ p w x(t) ≥ T λ, per-step occupancy in expectation ≤ c,
/// Σ_k x_jk(t) ≤ 1, x ≥ 0.
pub fn build_lp_e(
    model: &dyn OutcomeModel,
    p: &[f64],
    capacities: &[f64],
    horizon: usize,
) -> Result<(LinearProgram, LpELayout)> {
    check_shapes(model, p, capacities)?;
    check_probability_vector(p, p.len())?;
    if horizon == 0 {
        return Err(Error::InvalidInstance("horizon must be positive".into()));
    }
    let d = model.dims();
    let size = horizon as u128 * d.n_resources.max(1) as u128 * d.n_types as u128 * d.n_actions as u128;
    if size > LP_E_MAX_COEFFS {
        return Err(Error::TooLarge(format!("T|I_c||J||K| = {size} exceeds {LP_E_MAX_COEFFS}")));
    }
    let d_max = model.support_bounds().d_max.max(1) as usize;

    let mut lp = LinearProgram::maximize();
    let lambda = lp.add_labeled_var(1.0, true, "lambda");
    let reward_rows: Vec<usize> = (0..d.n_rewards)
        .map(|i| lp.add_labeled_row(vec![(lambda, -(horizon as f64))], Cmp::Ge, 0.0, format!("reward[{i}]")))
        .collect();
    let resource_rows: Vec<Vec<usize>> = (1..=horizon)
        .map(|t| {
            capacities
                .iter()
                .enumerate()
                .map(|(i, &c)| lp.add_labeled_row(Vec::new(), Cmp::Le, c, format!("resource[{i},{t}]")))
                .collect()
        })
        .collect();

    let type_rows: Vec<Vec<Option<usize>>> = (1..=horizon)
        .map(|t| {
            p.iter()
                .enumerate()
                .map(|(j, &pj)| {
                    (pj > 0.0).then(|| lp.add_labeled_row(Vec::new(), Cmp::Le, 1.0, format!("type[{j},{t}]")))
                })
                .collect()
        })
        .collect();

    let mut columns = Vec::new();
    for j in 0..d.n_types {
        let pj = p[j];
        if pj <= 0.0 {
            continue;
        }
        for k in 0..d.n_actions {
            let m = model.means(j, k);
            if m.w.iter().chain(&m.v).all(|&x| x == 0.0) {
                continue;
            }
            let tails: Vec<Vec<f64>> = (1..=d_max as u32).map(|s| model.alloc_tail(j, k, s)).collect();
            for tau in 1..=horizon {
                let var = lp.add_labeled_var(0.0, true, format!("x[{j},{k},{tau}]"));
                for (i, &w) in m.w.iter().enumerate() {
                    if w != 0.0 {
                        lp.push_coeff(reward_rows[i], var, pj * w);
                    }
                }
                // A unit allocated at tau still occupies resource i at t iff D >= t - tau + 1.
                for (s, tail) in tails.iter().enumerate() {
                    let t = tau + s;
                    if t > horizon {
                        break;
                    }
                    for (i, &e) in tail.iter().enumerate() {
                        if e != 0.0 {
                            lp.push_coeff(resource_rows[t - 1][i], var, pj * e);
                        }
                    }
                }
                lp.push_coeff(type_rows[tau - 1][j].expect("type row"), var, 1.0);
                columns.push((tau, j, k, var));
            }
        }
    }
    Ok((
        lp,
        LpELayout {
            lambda,
            columns,
            reward_rows,
            resource_rows,
        },
    ))
}
