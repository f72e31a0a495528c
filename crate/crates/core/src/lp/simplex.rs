//! Bounded-variable primal revised simplex with a two-phase start.
//!
//! Every row gets a logical column `s_i` with `a_i x + s_i = b_i`; the
//! logical's bounds encode the row sense. Rows that the all-logical basis
//! cannot satisfy receive an artificial column driven out in phase one.
//! Pricing is Dantzig's rule with a Harris ratio test; after a run of
//! degenerate pivots the solver switches to Bland's rule (lowest index for
//! both the entering and the leaving variable) until progress resumes.

use super::factor::{BasisFactor, SparseCol};
use super::{Cmp, LinearProgram, LpSolution, LpStatus, Sense};
use crate::error::{Error, Result};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 80;
const DEGENERATE_BEFORE_BLAND: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarStatus {
    Basic(usize),
    Lower,
    Upper,
    Zero,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

/// Stateful solver; columns may be appended between calls to [`Simplex::solve`]
/// (column generation keeps the current basis, which stays primal feasible).
pub struct Simplex {
    m: usize,
    sense: Sense,
    cols: Vec<SparseCol>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<VarStatus>,
    factor: Option<BasisFactor>,
    struct_cols: Vec<usize>,
    struct_obj: Vec<f64>,
    artificials: Vec<usize>,
    phase_one_done: bool,
    infeasible: bool,
    iterations: usize,
}

impl Simplex {
    pub fn new(lp: &LinearProgram) -> Result<Self> {
        lp.validate()?;
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut cols = Vec::with_capacity(m + n);
        let mut lo = Vec::with_capacity(m + n);
        let mut hi = Vec::with_capacity(m + n);
        let mut b = Vec::with_capacity(m);
        for (i, row) in lp.rows().iter().enumerate() {
            cols.push(SparseCol::unit(i, 1.0));
            let (l, h) = match row.cmp {
                Cmp::Le => (0.0, f64::INFINITY),
                Cmp::Ge => (f64::NEG_INFINITY, 0.0),
                Cmp::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
            b.push(row.rhs);
        }
        let mut cost = vec![0.0; m];

        let mut struct_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows().iter().enumerate() {
            for &(v, a) in &row.coeffs {
                struct_entries[v].push((i, a));
            }
        }

        let mut solver = Self {
            m,
            sense: lp.sense(),
            cols,
            lo,
            hi,
            cost: Vec::new(),
            b,
            x: Vec::new(),
            basis: Vec::new(),
            status: Vec::new(),
            factor: None,
            struct_cols: Vec::with_capacity(n),
            struct_obj: Vec::with_capacity(n),
            artificials: Vec::new(),
            phase_one_done: false,
            infeasible: false,
            iterations: 0,
        };
        std::mem::swap(&mut solver.cost, &mut cost);

        // Logical basis. Structurals start at zero, so the residual is b.
        let mut x = vec![0.0; m];
        let mut status = vec![VarStatus::Lower; m];
        let mut basis = vec![0; m];
        let mut artificial_specs = Vec::new();
        for i in 0..m {
            let r = solver.b[i];
            let (l, h) = (solver.lo[i], solver.hi[i]);
            if r >= l - PRIMAL_TOL && r <= h + PRIMAL_TOL {
                x[i] = r;
                status[i] = VarStatus::Basic(i);
                basis[i] = i;
            } else {
                let (bound, st) = if r > h { (h, VarStatus::Upper) } else { (l, VarStatus::Lower) };
                x[i] = bound;
                status[i] = st;
                artificial_specs.push((i, r - bound));
            }
        }
        solver.x = x;
        solver.status = status;
        solver.basis = basis;
        for (row, resid) in artificial_specs {
            let c = solver.cols.len();
            solver.cols.push(SparseCol::unit(row, resid.signum()));
            solver.lo.push(0.0);
            solver.hi.push(f64::INFINITY);
            solver.cost.push(0.0);
            solver.x.push(resid.abs());
            solver.status.push(VarStatus::Basic(row));
            solver.basis[row] = c;
            solver.artificials.push(c);
        }
        if solver.artificials.is_empty() {
            solver.phase_one_done = true;
        }
        for (v, var) in lp.vars().iter().enumerate() {
            solver.push_structural(var.obj, var.nonneg, std::mem::take(&mut struct_entries[v]));
        }
        Ok(solver)
    }

    fn push_structural(&mut self, obj: f64, nonneg: bool, mut entries: Vec<(usize, f64)>) -> usize {
        entries.sort_by_key(|e| e.0);
        let mut col = SparseCol::default();
        for (r, a) in entries {
            if col.rows.last() == Some(&r) {
                *col.vals.last_mut().unwrap() += a;
            } else {
                col.rows.push(r);
                col.vals.push(a);
            }
        }
        let c = self.cols.len();
        self.cols.push(col);
        if nonneg {
            self.lo.push(0.0);
            self.status.push(VarStatus::Lower);
        } else {
            self.lo.push(f64::NEG_INFINITY);
            self.status.push(VarStatus::Zero);
        }
        self.hi.push(f64::INFINITY);
        let internal = match self.sense {
            Sense::Maximize => obj,
            Sense::Minimize => -obj,
        };
        self.cost.push(internal);
        self.x.push(0.0);
        self.struct_cols.push(c);
        self.struct_obj.push(obj);
        c
    }

    /// Appends a variable; returns its user-facing index.
    pub fn add_column(&mut self, obj: f64, nonneg: bool, entries: Vec<(usize, f64)>) -> Result<usize> {
        if let Some(&(r, _)) = entries.iter().find(|e| e.0 >= self.m) {
            return Err(Error::IndexOutOfRange {
                what: "row",
                index: r,
                len: self.m,
            });
        }
        if !obj.is_finite() || entries.iter().any(|e| !e.1.is_finite()) {
            return Err(Error::NumericalFailure("non-finite column".into()));
        }
        self.push_structural(obj, nonneg, entries);
        Ok(self.struct_cols.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.struct_cols.len()
    }

    pub fn solve(&mut self) -> Result<LpSolution> {
        if self.factor.is_none() {
            self.refactor()?;
        }
        if !self.phase_one_done {
            let mut phase_cost = vec![0.0; self.cols.len()];
            for &a in &self.artificials {
                phase_cost[a] = -1.0;
            }
            if let PhaseEnd::Unbounded = self.run_phase(&phase_cost)? {
                return Err(Error::NumericalFailure("phase one reported unbounded".into()));
            }
            let infeas: f64 = self.artificials.iter().map(|&a| self.x[a]).sum();
            let scale = self.b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if infeas > 1e-7 * scale {
                self.infeasible = true;
            }
            for &a in &self.artificials {
                self.hi[a] = 0.0;
                if let VarStatus::Upper | VarStatus::Zero = self.status[a] {
                    self.status[a] = VarStatus::Lower;
                    self.x[a] = 0.0;
                }
            }
            self.phase_one_done = true;
        }
        if self.infeasible {
            return Ok(self.empty_solution(LpStatus::Infeasible));
        }
        let cost = self.cost.clone();
        match self.run_phase(&cost)? {
            PhaseEnd::Unbounded => Ok(self.empty_solution(LpStatus::Unbounded)),
            PhaseEnd::Optimal => self.extract(),
        }
    }

    fn empty_solution(&self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            objective: f64::NAN,
            dual_objective: f64::NAN,
            primal: vec![0.0; self.struct_cols.len()],
            duals: vec![0.0; self.m],
            iterations: self.iterations,
        }
    }

    fn nonbasic_value(&self, c: usize) -> f64 {
        match self.status[c] {
            VarStatus::Lower => self.lo[c],
            VarStatus::Upper => self.hi[c],
            VarStatus::Zero => 0.0,
            VarStatus::Basic(_) => self.x[c],
        }
    }

    fn refactor(&mut self) -> Result<()> {
        for _attempt in 0..=self.m {
            let cols: Vec<SparseCol> = self.basis.iter().map(|&c| self.cols[c].clone()).collect();
            match BasisFactor::factorize(self.m, cols) {
                Ok(f) => {
                    self.factor = Some(f);
                    self.recompute_basic_values();
                    return Ok(());
                }
                Err(sing) => {
                    // Swap dependent columns for the logicals of uncovered rows.
                    for (&pos, &row) in sing.dependent_positions.iter().zip(&sing.free_rows) {
                        let old = self.basis[pos];
                        self.status[old] = if self.lo[old].is_finite() {
                            VarStatus::Lower
                        } else if self.hi[old].is_finite() {
                            VarStatus::Upper
                        } else {
                            VarStatus::Zero
                        };
                        self.x[old] = self.nonbasic_value(old);
                        let logical = row;
                        if let VarStatus::Basic(p) = self.status[logical] {
                            return Err(Error::NumericalFailure(format!(
                                "basis repair: logical {logical} already basic at {p}"
                            )));
                        }
                        self.basis[pos] = logical;
                        self.status[logical] = VarStatus::Basic(pos);
                    }
                }
            }
        }
        Err(Error::NumericalFailure("basis repair did not converge".into()))
    }

    fn recompute_basic_values(&mut self) {
        let mut rhs = self.b.clone();
        for c in 0..self.cols.len() {
            if let VarStatus::Basic(_) = self.status[c] {
                continue;
            }
            let v = self.nonbasic_value(c);
            self.x[c] = v;
            if v != 0.0 {
                let col = &self.cols[c];
                for (&r, &a) in col.rows.iter().zip(&col.vals) {
                    rhs[r] -= a * v;
                }
            }
        }
        let xb = self.factor.as_ref().expect("factor").ftran(&rhs);
        for (pos, &c) in self.basis.iter().enumerate() {
            self.x[c] = xb[pos];
        }
    }

    fn run_phase(&mut self, cost: &[f64]) -> Result<PhaseEnd> {
        let max_iter = 50_000 + 60 * (self.m + self.cols.len());
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut verified = false;
        loop {
            if self.iterations > max_iter {
                return Err(Error::NonTermination(self.iterations));
            }
            let cb: Vec<f64> = self.basis.iter().map(|&c| cost[c]).collect();
            let y = self.factor.as_ref().expect("factor").btran(&cb);

            let entering = self.price(cost, &y, bland);
            let Some((q, dq)) = entering else {
                // Confirm optimality on a fresh factorization.
                if verified || self.factor.as_ref().map_or(0, |f| f.num_etas()) == 0 {
                    return Ok(PhaseEnd::Optimal);
                }
                self.refactor()?;
                verified = true;
                continue;
            };
            verified = false;

            let mut aq = vec![0.0; self.m];
            for (&r, &a) in self.cols[q].rows.iter().zip(&self.cols[q].vals) {
                aq[r] += a;
            }
            let alpha = self.factor.as_ref().expect("factor").ftran(&aq);
            let dir = if dq > 0.0 { 1.0 } else { -1.0 };

            let leave = self.ratio_test(&alpha, dir, bland);
            let range = self.hi[q] - self.lo[q];
            let flip = match leave {
                Some((_, t)) => range.is_finite() && range <= t,
                None => range.is_finite(),
            };
            self.iterations += 1;
            if flip {
                let t = range;
                for (pos, &c) in self.basis.iter().enumerate() {
                    self.x[c] -= dir * t * alpha[pos];
                }
                self.status[q] = if dir > 0.0 { VarStatus::Upper } else { VarStatus::Lower };
                self.x[q] = self.nonbasic_value(q);
                degenerate_run = 0;
                bland = false;
                continue;
            }
            let Some((p, t)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };

            for (pos, &c) in self.basis.iter().enumerate() {
                self.x[c] -= dir * t * alpha[pos];
            }
            self.x[q] += dir * t;
            let leaving = self.basis[p];
            let a = dir * alpha[p];
            self.status[leaving] = if a > 0.0 {
                if self.lo[leaving].is_finite() {
                    VarStatus::Lower
                } else {
                    VarStatus::Zero
                }
            } else if self.hi[leaving].is_finite() {
                VarStatus::Upper
            } else {
                VarStatus::Zero
            };
            self.x[leaving] = self.nonbasic_value(leaving);
            self.basis[p] = q;
            self.status[q] = VarStatus::Basic(p);

            let factor = self.factor.as_mut().expect("factor");
            factor.push_eta(p, &alpha);
            if factor.num_etas() >= REFACTOR_EVERY {
                self.refactor()?;
            }

            if t <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_BEFORE_BLAND {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    fn price(&self, cost: &[f64], y: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.cols.len() {
            let st = self.status[c];
            if matches!(st, VarStatus::Basic(_)) || self.lo[c] == self.hi[c] {
                continue;
            }
            let d = cost[c] - self.cols[c].dot(y);
            let eligible = match st {
                VarStatus::Lower => d > DUAL_TOL,
                VarStatus::Upper => d < -DUAL_TOL,
                VarStatus::Zero => d.abs() > DUAL_TOL,
                VarStatus::Basic(_) => false,
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((c, d));
            }
            if best.is_none_or(|(_, bd)| d.abs() > bd.abs()) {
                best = Some((c, d));
            }
        }
        best
    }

    /// Returns the leaving basis position and the step length.
    fn ratio_test(&self, alpha: &[f64], dir: f64, bland: bool) -> Option<(usize, f64)> {
        let exact = |pos: usize| -> Option<f64> {
            let a = dir * alpha[pos];
            if a.abs() <= PIVOT_TOL {
                return None;
            }
            let c = self.basis[pos];
            if a > 0.0 {
                self.lo[c].is_finite().then(|| (self.x[c] - self.lo[c]) / a)
            } else {
                self.hi[c].is_finite().then(|| (self.hi[c] - self.x[c]) / -a)
            }
        };
        if bland {
            let mut t_min = f64::INFINITY;
            for pos in 0..self.m {
                if let Some(t) = exact(pos) {
                    t_min = t_min.min(t.max(0.0));
                }
            }
            if !t_min.is_finite() {
                return None;
            }
            let mut best: Option<(usize, usize)> = None;
            for pos in 0..self.m {
                if let Some(t) = exact(pos) {
                    if t.max(0.0) <= t_min + 1e-12 {
                        let c = self.basis[pos];
                        if best.is_none_or(|(_, bc)| c < bc) {
                            best = Some((pos, c));
                        }
                    }
                }
            }
            return best.map(|(pos, _)| (pos, t_min));
        }

        let mut relaxed = f64::INFINITY;
        for pos in 0..self.m {
            let a = dir * alpha[pos];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let c = self.basis[pos];
            let t = if a > 0.0 {
                if !self.lo[c].is_finite() {
                    continue;
                }
                (self.x[c] - self.lo[c] + PRIMAL_TOL) / a
            } else {
                if !self.hi[c].is_finite() {
                    continue;
                }
                (self.hi[c] - self.x[c] + PRIMAL_TOL) / -a
            };
            relaxed = relaxed.min(t);
        }
        if !relaxed.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for pos in 0..self.m {
            if let Some(t) = exact(pos) {
                if t <= relaxed {
                    let mag = alpha[pos].abs();
                    if best.is_none_or(|(_, _, bm)| mag > bm) {
                        best = Some((pos, t.max(0.0), mag));
                    }
                }
            }
        }
        best.map(|(pos, t, _)| (pos, t))
    }

    fn extract(&mut self) -> Result<LpSolution> {
        let cb: Vec<f64> = self.basis.iter().map(|&c| self.cost[c]).collect();
        let factor = self.factor.as_ref().expect("factor");
        let y = factor.btran(&cb);
        let sign = match self.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let primal: Vec<f64> = self.struct_cols.iter().map(|&c| self.x[c]).collect();
        let objective: f64 = primal.iter().zip(&self.struct_obj).map(|(x, c)| x * c).sum();
        let mut dual_internal: f64 = self.b.iter().zip(&y).map(|(b, y)| b * y).sum();
        for c in 0..self.cols.len() {
            if matches!(self.status[c], VarStatus::Basic(_)) {
                continue;
            }
            let v = self.x[c];
            if v != 0.0 {
                dual_internal += (self.cost[c] - self.cols[c].dot(&y)) * v;
            }
        }
        let duals: Vec<f64> = y.iter().map(|v| sign * v).collect();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective,
            dual_objective: sign * dual_internal,
            primal,
            duals,
            iterations: self.iterations,
        })
    }
}

/// One-shot solve with certificate checks.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let mut s = Simplex::new(lp)?;
    let sol = s.solve()?;
    if sol.status == LpStatus::Optimal {
        super::check_certificate(lp, &sol)?;
    }
    Ok(sol)
}
