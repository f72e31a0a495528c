//! Basis factorization for the revised simplex.
//!
//! The basis is reduced by peeling row singletons (a lower-triangular block)
//! and column singletons (an upper-triangular block); whatever remains is a
//! small dense kernel factored with partial pivoting. Basis changes between
//! refactorizations are kept as product-form eta columns.
//!
//! The structure matters for the steady-state LPs: each type row usually
//! touches a single basic column, so those rows peel off as singletons and
//! the kernel stays near the number of coupling rows.

const SINGLETON_TOL: f64 = 1e-11;
const KERNEL_TOL: f64 = 1e-10;

/// Sparse column as parallel row-index / value lists.
#[derive(Clone, Debug, Default)]
pub(crate) struct SparseCol {
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseCol {
    pub fn unit(row: usize, val: f64) -> Self {
        Self {
            rows: vec![row],
            vals: vec![val],
        }
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.vals)
            .map(|(&r, &v)| v * dense[r])
            .sum()
    }
}

#[derive(Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug)]
struct DenseLu {
    n: usize,
    // row-major, L below the diagonal (unit), U on and above
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    fn solve_transpose(&self, d: &mut [f64]) {
        let n = self.n;
        let mut w = d.to_vec();
        // U^T w = d
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s / self.lu[i * n + i];
        }
        // L^T v = w
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * w[j];
            }
            w[i] = s;
        }
        for i in 0..n {
            d[self.perm[i]] = w[i];
        }
    }
}

/// Outcome of a failed factorization: basis positions whose columns are
/// dependent, and rows left without a pivot.
#[derive(Debug)]
pub(crate) struct Singular {
    pub dependent_positions: Vec<usize>,
    pub free_rows: Vec<usize>,
}

#[derive(Debug)]
pub(crate) struct BasisFactor {
    m: usize,
    cols: Vec<SparseCol>,
    row_pivots: Vec<(usize, usize, f64)>,
    col_pivots: Vec<(usize, usize, f64)>,
    kernel_rows: Vec<usize>,
    kernel_pos: Vec<usize>,
    kernel: DenseLu,
    etas: Vec<Eta>,
}

impl BasisFactor {
    pub fn factorize(m: usize, cols: Vec<SparseCol>) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut row_lists: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in cols.iter().enumerate() {
            for &r in &col.rows {
                row_lists[r].push(c);
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut row_count: Vec<usize> = row_lists.iter().map(Vec::len).collect();
        let mut row_pivots = Vec::new();

        // Row singletons.
        let mut stack: Vec<usize> = (0..m).filter(|&r| row_count[r] == 1).collect();
        while let Some(r) = stack.pop() {
            if !row_active[r] || row_count[r] != 1 {
                continue;
            }
            let Some(&c) = row_lists[r].iter().find(|&&c| col_active[c]) else {
                continue;
            };
            let val = value_at(&cols[c], r);
            if val.abs() <= SINGLETON_TOL {
                continue;
            }
            row_pivots.push((r, c, val));
            row_active[r] = false;
            col_active[c] = false;
            for &rr in &cols[c].rows {
                if row_active[rr] {
                    row_count[rr] -= 1;
                    if row_count[rr] == 1 {
                        stack.push(rr);
                    }
                }
            }
        }

        // Column singletons on what remains.
        let mut col_count: Vec<usize> = (0..m)
            .map(|c| {
                if col_active[c] {
                    cols[c].rows.iter().filter(|&&r| row_active[r]).count()
                } else {
                    0
                }
            })
            .collect();
        let mut col_pivots = Vec::new();
        let mut stack: Vec<usize> = (0..m)
            .filter(|&c| col_active[c] && col_count[c] == 1)
            .collect();
        while let Some(c) = stack.pop() {
            if !col_active[c] || col_count[c] != 1 {
                continue;
            }
            let col = &cols[c];
            let Some(idx) = col.rows.iter().position(|&r| row_active[r]) else {
                continue;
            };
            let r = col.rows[idx];
            let val = col.vals[idx];
            if val.abs() <= SINGLETON_TOL {
                continue;
            }
            col_pivots.push((r, c, val));
            row_active[r] = false;
            col_active[c] = false;
            for &cc in &row_lists[r] {
                if col_active[cc] {
                    col_count[cc] -= 1;
                    if col_count[cc] == 1 {
                        stack.push(cc);
                    }
                }
            }
        }

        let kernel_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
        let kernel_pos: Vec<usize> = (0..m).filter(|&c| col_active[c]).collect();
        let k = kernel_rows.len();
        debug_assert_eq!(k, kernel_pos.len());
        let mut row_slot = vec![usize::MAX; m];
        for (a, &r) in kernel_rows.iter().enumerate() {
            row_slot[r] = a;
        }
        let mut dense = vec![0.0; k * k];
        for (b, &c) in kernel_pos.iter().enumerate() {
            for (&r, &v) in cols[c].rows.iter().zip(&cols[c].vals) {
                if row_slot[r] != usize::MAX {
                    dense[row_slot[r] * k + b] += v;
                }
            }
        }
        let kernel = match dense_lu(k, dense) {
            Ok(lu) => lu,
            Err((dep_cols, free_slots)) => {
                return Err(Singular {
                    dependent_positions: dep_cols.into_iter().map(|b| kernel_pos[b]).collect(),
                    free_rows: free_slots.into_iter().map(|a| kernel_rows[a]).collect(),
                })
            }
        };

        Ok(Self {
            m,
            cols,
            row_pivots,
            col_pivots,
            kernel_rows,
            kernel_pos,
            kernel,
            etas: Vec::new(),
        })
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row, the result by basis position.
    pub fn ftran(&self, rhs: &[f64]) -> Vec<f64> {
        let mut work = rhs.to_vec();
        let mut x = vec![0.0; self.m];
        for &(r, c, piv) in &self.row_pivots {
            let xc = work[r] / piv;
            x[c] = xc;
            if xc != 0.0 {
                axpy_col(&self.cols[c], -xc, &mut work);
            }
        }
        if !self.kernel_rows.is_empty() {
            let mut b: Vec<f64> = self.kernel_rows.iter().map(|&r| work[r]).collect();
            self.kernel.solve(&mut b);
            for (slot, &c) in self.kernel_pos.iter().enumerate() {
                x[c] = b[slot];
                if b[slot] != 0.0 {
                    axpy_col(&self.cols[c], -b[slot], &mut work);
                }
            }
        }
        for &(r, c, piv) in self.col_pivots.iter().rev() {
            let xc = work[r] / piv;
            x[c] = xc;
            if xc != 0.0 {
                axpy_col(&self.cols[c], -xc, &mut work);
            }
        }
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    x[i] -= a * xp;
                }
            }
        }
        x
    }

    /// Solves `B^T y = d`; `d` is indexed by basis position, the result by row.
    pub fn btran(&self, d: &[f64]) -> Vec<f64> {
        let mut d = d.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = d[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * d[i];
            }
            d[eta.pos] = s / eta.pivot;
        }
        let mut y = vec![0.0; self.m];
        for &(r, c, piv) in &self.col_pivots {
            let s = d[c] - self.cols[c].dot(&y);
            y[r] = s / piv;
        }
        if !self.kernel_rows.is_empty() {
            let mut rhs: Vec<f64> = self
                .kernel_pos
                .iter()
                .map(|&c| d[c] - self.cols[c].dot(&y))
                .collect();
            self.kernel.solve_transpose(&mut rhs);
            for (slot, &r) in self.kernel_rows.iter().enumerate() {
                y[r] = rhs[slot];
            }
        }
        for &(r, c, piv) in self.row_pivots.iter().rev() {
            // y[r] is still zero here, so the dot product skips the pivot row
            let s = d[c] - self.cols[c].dot(&y);
            y[r] = s / piv;
        }
        y
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

fn value_at(col: &SparseCol, row: usize) -> f64 {
    col.rows
        .iter()
        .zip(&col.vals)
        .filter(|(&r, _)| r == row)
        .map(|(_, &v)| v)
        .sum()
}

fn axpy_col(col: &SparseCol, a: f64, out: &mut [f64]) {
    for (&r, &v) in col.rows.iter().zip(&col.vals) {
        out[r] += a * v;
    }
}

/// Right-looking LU with partial pivoting. On failure returns the dependent
/// columns and the rows that never received a pivot.
fn dense_lu(n: usize, mut a: Vec<f64>) -> Result<DenseLu, (Vec<usize>, Vec<usize>)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut dependent = Vec::new();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    // `next` is the next row slot to be assigned a pivot
    let mut next = 0;
    let mut col_order = Vec::with_capacity(n);
    for col in 0..n {
        let mut best = next;
        let mut best_val = 0.0;
        for row in next..n {
            let v = a[row * n + col].abs();
            if v > best_val {
                best_val = v;
                best = row;
            }
        }
        if best_val <= KERNEL_TOL * scale {
            dependent.push(col);
            continue;
        }
        if best != next {
            for j in 0..n {
                a.swap(best * n + j, next * n + j);
            }
            perm.swap(best, next);
        }
        let piv = a[next * n + col];
        for row in next + 1..n {
            let f = a[row * n + col] / piv;
            if f != 0.0 {
                a[row * n + col] = f;
                for j in col + 1..n {
                    a[row * n + j] -= f * a[next * n + j];
                }
            } else {
                a[row * n + col] = 0.0;
            }
        }
        col_order.push(col);
        next += 1;
    }
    if !dependent.is_empty() {
        let free_rows = perm[next..].to_vec();
        return Err((dependent, free_rows));
    }
    // With no dependent columns col_order is the identity, so `a` already
    // holds L (strictly below diagonal) and U.
    debug_assert!(col_order.iter().enumerate().all(|(i, &c)| i == c));
    Ok(DenseLu { n, lu: a, perm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(m: usize, a: &[&[f64]]) -> Vec<SparseCol> {
        (0..m)
            .map(|c| {
                let mut col = SparseCol::default();
                for r in 0..m {
                    if a[r][c] != 0.0 {
                        col.rows.push(r);
                        col.vals.push(a[r][c]);
                    }
                }
                col
            })
            .collect()
    }

    fn matvec(a: &[&[f64]], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
            .collect()
    }

    fn transpose_matvec(a: &[&[f64]], y: &[f64]) -> Vec<f64> {
        let n = a[0].len();
        (0..n)
            .map(|c| a.iter().zip(y).map(|(row, yi)| row[c] * yi).sum())
            .collect()
    }

    #[test]
    fn ftran_btran_mixed_structure() {
        // row singleton (row 0), a 2x2 kernel, and a column singleton
        let a: [&[f64]; 4] = [
            &[2.0, 0.0, 0.0, 0.0],
            &[1.0, 3.0, 1.0, 0.0],
            &[0.0, 1.0, 4.0, 0.0],
            &[5.0, 2.0, 0.0, 7.0],
        ];
        let f = BasisFactor::factorize(4, dense_cols(4, &a)).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0];
        let x = f.ftran(&b);
        let back = matvec(&a, &x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
        let y = f.btran(&b);
        let back = transpose_matvec(&a, &y);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactor() {
        let a: [&[f64]; 3] = [&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]];
        let mut f = BasisFactor::factorize(3, dense_cols(3, &a)).unwrap();
        let new_col = [2.0, 1.0, -1.0];
        let alpha = f.ftran(&new_col);
        f.push_eta(1, &alpha);
        let b2: [&[f64]; 3] = [&[1.0, 2.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, -1.0, 1.0]];
        let rhs = [1.0, 2.0, 3.0];
        let x = f.ftran(&rhs);
        let back = matvec(&b2, &x);
        for (u, v) in back.iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-12);
        }
        let y = f.btran(&rhs);
        let back = transpose_matvec(&b2, &y);
        for (u, v) in back.iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_basis_reports_dependency() {
        let a: [&[f64]; 3] = [&[1.0, 2.0, 0.0], &[2.0, 4.0, 0.0], &[0.0, 0.0, 1.0]];
        let err = BasisFactor::factorize(3, dense_cols(3, &a)).unwrap_err();
        assert_eq!(err.dependent_positions.len(), 1);
        assert_eq!(err.free_rows.len(), 1);
    }
}
