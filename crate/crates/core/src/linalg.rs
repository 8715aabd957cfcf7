//! Dense helpers on top of nalgebra and a small deterministic CSR matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{DdrError, Result};

/// Relative pivot threshold below which a dense LU is declared singular.
const SINGULAR_PIVOT: f64 = 1e-13;

/// Orthonormalizes the columns of `coeffs` with respect to the metric `metric`
/// (i.e. makes `Cᵀ M C = I`) by two passes of Cholesky-based triangular
/// factorization. Column `j` of the result only depends on columns `0..=j`
/// of the input, so graded families stay hierarchical.
pub fn orthonormalize(coeffs: &DMatrix<f64>, metric: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut c = coeffs.clone();
    if c.ncols() == 0 {
        return Some(c);
    }
    for _ in 0..2 {
        let gram = c.transpose() * metric * &c;
        let gram = symmetrize(&gram);
        let chol = gram.cholesky()?;
        // C <- C L^{-T}, i.e. solve L X^T = C^T.
        let l = chol.l();
        let ct = c.transpose();
        let xt = l.solve_lower_triangular(&ct)?;
        c = xt.transpose();
    }
    Some(c)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solves `A X = B` with partial pivoting; `None` if `A` is (numerically) singular.
pub fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    assert_eq!(a.nrows(), a.ncols(), "lu_solve needs a square matrix");
    assert_eq!(a.nrows(), b.nrows());
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    let max = diag.max();
    if max.is_nan() || max <= 0.0 || diag.min() < SINGULAR_PIVOT * max {
        return None;
    }
    lu.solve(b)
}

/// Solves `G X = B` for symmetric positive definite `G`.
pub fn spd_solve(g: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if g.nrows() == 0 {
        return Some(DMatrix::zeros(0, b.ncols()));
    }
    let chol = symmetrize(g).cholesky()?;
    Some(chol.solve(b))
}

/// Outcome of a numerical rank computation.
#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    /// Threshold actually applied, `rel_tol * sigma_max`.
    pub threshold: f64,
    /// Ratio between the smallest retained and the largest discarded singular
    /// value (infinite if nothing is discarded or nothing is retained).
    pub gap: f64,
    pub singular_values: Vec<f64>,
}

/// Numerical rank from the singular values with threshold `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> RankInfo {
    if m.nrows() == 0 || m.ncols() == 0 {
        return RankInfo {
            rank: 0,
            threshold: 0.0,
            gap: f64::INFINITY,
            singular_values: Vec::new(),
        };
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let smax = sv[0];
    let threshold = rel_tol * smax;
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().take_while(|&&s| s > threshold).count()
    };
    let gap = if rank == 0 || rank == sv.len() || sv[rank] == 0.0 {
        f64::INFINITY
    } else {
        sv[rank - 1] / sv[rank]
    };
    RankInfo {
        rank,
        threshold,
        gap,
        singular_values: sv,
    }
}

/// Compressed sparse row matrix with deterministic assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Triplet accumulator. Duplicates are summed in insertion order.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Scatters a dense local block through optional global index maps.
    pub fn add_block(&mut self, rows: &[Option<usize>], cols: &[Option<usize>], block: &DMatrix<f64>) {
        debug_assert_eq!(rows.len(), block.nrows());
        debug_assert_eq!(cols.len(), block.ncols());
        for (i, gi) in rows.iter().enumerate() {
            let Some(gi) = *gi else { continue };
            for (j, gj) in cols.iter().enumerate() {
                let Some(gj) = *gj else { continue };
                self.push(gi, gj, block[(i, j)]);
            }
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        // Stable sort keeps insertion order among duplicates.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (r, self.col_idx[p], self.values[p]))
        })
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in sparse product");
        DVector::from_fn(self.nrows, |r, _| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(|p| self.values[p] * x[self.col_idx[p]])
                .sum()
        })
    }

    /// `selfᵀ x`.
    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows, "dimension mismatch in sparse product");
        let mut y = DVector::zeros(self.ncols);
        for (r, c, v) in self.iter() {
            y[c] += v * x[r];
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = TripletBuilder::new(self.ncols, self.nrows);
        for (r, c, v) in self.iter() {
            t.push(c, r, v);
        }
        t.build()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            d[(r, c)] += v;
        }
        d
    }

    /// Sub-matrix restricted to the given rows and columns (in that order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            col_map[c] = j;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let j = col_map[self.col_idx[p]];
                if j != usize::MAX {
                    t.push(i, j, self.values[p]);
                }
            }
        }
        t.build()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<&SparseMatrix> for DMatrix<f64> {
    fn from(m: &SparseMatrix) -> Self {
        m.to_dense()
    }
}

/// Maps a dense solve failure to a crate error.
pub(crate) fn singular(element: usize, what: &'static str) -> DdrError {
    DdrError::SingularLocal { element, what }
}

pub(crate) fn require<T>(v: Option<T>, element: usize, what: &'static str) -> Result<T> {
    v.ok_or_else(|| singular(element, what))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = TripletBuilder::new(2, 3);
        t.push(1, 2, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 2, 0.5);
        let m = t.build();
        assert_eq!(m.nnz(), 2);
        let d = m.to_dense();
        assert_eq!(d[(1, 2)], 1.5);
        assert_eq!(d[(0, 0)], 2.0);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(m.mul_vec(&x), DVector::from_vec(vec![2.0, 4.5]));
        assert_eq!(m.transpose().to_dense(), d.transpose());
    }

    #[test]
    fn orthonormalize_hilbert_like() {
        // Monomials 1, x, x^2, x^3 on [0, 1].
        let metric = DMatrix::from_fn(4, 4, |i, j| 1.0 / (i + j + 1) as f64);
        let q = orthonormalize(&DMatrix::identity(4, 4), &metric).unwrap();
        let g = q.transpose() * &metric * &q;
        assert!((g - DMatrix::identity(4, 4)).amax() < 1e-13);
        // upper triangular: hierarchical
        for j in 0..4 {
            for i in j + 1..4 {
                assert_eq!(q[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rank_of_outer_product() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &u * u.transpose();
        let info = numerical_rank(&m, 1e-9);
        assert_eq!(info.rank, 1);
        assert!(info.gap > 1e10);
    }

    #[test]
    fn lu_detects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(lu_solve(&a, &DMatrix::identity(2, 2)).is_none());
    }
}
