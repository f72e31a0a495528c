//! Explicit dual programs in the `p_j`-weighted form: the type multipliers
//! `β` carry the arrival probability in the objective instead of the rows.

use super::{Cmp, LinearProgram};
use crate::error::{Error, Result};
use crate::model::{check_probability_vector, OutcomeModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualKind {
    LpS,
    /// Same shape as `LpS`; the caller passes the empirical distribution.
    LpRs,
    LpE { horizon: usize },
}

#[derive(Clone, Debug)]
pub struct DualLayout {
    /// `alpha[t][i]`; a single period for the steady-state kinds.
    pub alpha: Vec<Vec<usize>>,
    /// `beta[t][j]`.
    pub beta: Vec<Vec<usize>>,
    pub rho: Vec<usize>,
}

pub fn build_dual(
    kind: DualKind,
    model: &dyn OutcomeModel,
    p: &[f64],
    capacities: &[f64],
) -> Result<(LinearProgram, DualLayout)> {
    let d = model.dims();
    if p.len() != d.n_types || capacities.len() != d.n_resources {
        return Err(Error::DimensionMismatch("dual program data".into()));
    }
    check_probability_vector(p, d.n_types)?;
    let (horizon, expanded) = match kind {
        DualKind::LpS | DualKind::LpRs => (1, false),
        DualKind::LpE { horizon } => {
            if horizon == 0 {
                return Err(Error::InvalidInstance("horizon must be positive".into()));
            }
            (horizon, true)
        }
    };
    let d_max = model.support_bounds().d_max.max(1) as usize;

    let mut lp = LinearProgram::minimize();
    let rho: Vec<usize> = (0..d.n_rewards).map(|i| lp.add_labeled_var(0.0, true, format!("rho[{i}]"))).collect();
    let mut alpha = Vec::with_capacity(horizon);
    let mut beta = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        alpha.push(
            (0..d.n_resources)
                .map(|i| lp.add_labeled_var(capacities[i], true, format!("alpha[{i},{t}]")))
                .collect::<Vec<_>>(),
        );
        beta.push(
            (0..d.n_types)
                .map(|j| lp.add_labeled_var(p[j], true, format!("beta[{j},{t}]")))
                .collect::<Vec<_>>(),
        );
    }
    let scale = horizon as f64;
    lp.add_labeled_row(rho.iter().map(|&r| (r, scale)).collect(), Cmp::Ge, 1.0, "rho_sum");

    for j in 0..d.n_types {
        for k in 0..d.n_actions {
            let m = model.means(j, k);
            if m.w.iter().chain(&m.v).all(|&x| x == 0.0) {
                continue;
            }
            if !expanded {
                let mut coeffs = vec![(beta[0][j], 1.0)];
                coeffs.extend(m.v.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &v)| (alpha[0][i], v)));
                coeffs.extend(m.w.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &w)| (rho[i], -w)));
                lp.add_labeled_row(coeffs, Cmp::Ge, 0.0, format!("col[{j},{k}]"));
                continue;
            }
            let tails: Vec<Vec<f64>> = (1..=d_max as u32).map(|s| model.alloc_tail(j, k, s)).collect();
            for t in 1..=horizon {
                let mut coeffs = vec![(beta[t - 1][j], 1.0)];
                let last = (t + d_max - 1).min(horizon);
                for tau in t..=last {
                    let tail = &tails[tau - t];
                    for (i, &e) in tail.iter().enumerate() {
                        if e != 0.0 {
                            coeffs.push((alpha[tau - 1][i], e));
                        }
                    }
                }
                coeffs.extend(m.w.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(i, &w)| (rho[i], -w)));
                lp.add_labeled_row(coeffs, Cmp::Ge, 0.0, format!("col[{j},{k},{t}]"));
            }
        }
    }
    Ok((lp, DualLayout { alpha, beta, rho }))
}
