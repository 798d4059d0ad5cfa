//! Compressed sparse row storage plus the few dense helpers the solver needs.
//!
//! Assembly goes through [`TripletBuilder`]; duplicates are summed when the
//! builder is finalized, so a [`SparseMatrix`] never holds two entries for the
//! same `(row, col)` pair.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{DfnError, Result};

#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols, "({row}, {col}) out of bounds");
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Adds `scale * block` with its top-left corner at `(row_offset, col_offset)`.
    pub fn add_sparse(&mut self, row_offset: usize, col_offset: usize, block: &SparseMatrix, scale: f64) {
        for r in 0..block.nrows() {
            for (c, v) in block.row(r) {
                self.push(row_offset + r, col_offset + c, scale * v);
            }
        }
    }

    /// Adds `scale * block[i, j]` at `(rows[i], cols[j])`.
    pub fn add_dense_mapped(&mut self, rows: &[usize], cols: &[usize], block: &Mat<f64>, scale: f64) {
        assert_eq!(rows.len(), block.nrows());
        assert_eq!(cols.len(), block.ncols());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                self.push(r, c, scale * block[(i, j)]);
            }
        }
    }

    /// Sums duplicates in insertion order, so mirrored contributions give exactly symmetric sums.
    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

/// Real sparse matrix in CSR layout. Explicit zeros may be present.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
    }

    pub fn from_dense(m: &Mat<f64>) -> Self {
        let mut b = TripletBuilder::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                b.push(i, j, m[(i, j)]);
            }
        }
        b.build()
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Iterates over all stored `(row, col, value)` triples in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `selfᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                y[c] += v * x[r];
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for (r, c, v) in self.iter() {
            b.entries.push((c, r, v));
        }
        b.build()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut b = TripletBuilder::new(self.nrows, other.ncols);
        let mut acc = vec![0.0; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.ncols];
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, v) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * v;
                }
            }
            for &c in &touched {
                b.entries.push((r, c, acc[c]));
                acc[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
        }
        b.build()
    }

    /// Columns holding at least one stored entry, ascending.
    pub fn nonzero_columns(&self) -> Vec<usize> {
        let mut seen = vec![false; self.ncols];
        for &c in &self.col_idx {
            seen[c] = true;
        }
        (0..self.ncols).filter(|&c| seen[c]).collect()
    }

    /// Dense copy of the sub-block with the given columns (all rows).
    pub fn dense_columns(&self, cols: &[usize]) -> Mat<f64> {
        let mut pos = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            pos[c] = j;
        }
        let mut m = Mat::zeros(self.nrows, cols.len());
        for (r, c, v) in self.iter() {
            if pos[c] != usize::MAX {
                m[(r, pos[c])] += v;
            }
        }
        m
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> = self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| DfnError::Dimension(format!("sparse conversion failed: {e:?}")))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        self.iter().map(|(r, c, v)| (v - self.get(c, r)).abs()).fold(0.0, f64::max)
    }

    /// Submatrix with the given rows and columns, renumbered in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut cpos = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            cpos[c] = j;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if cpos[c] != usize::MAX {
                    b.entries.push((i, cpos[c], v));
                }
            }
        }
        b.build()
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &Mat<f64>) -> Result<Mat<f64>> {
    let n = m.nrows();
    let llt =
        m.llt(Side::Lower).map_err(|e| DfnError::Stabilization(format!("matrix is not positive definite: {e:?}")))?;
    Ok(llt.solve(Mat::<f64>::identity(n, n)))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| DfnError::Stabilization(format!("eigensolver failed: {e:?}")))
}

/// Spectral condition number of a symmetric positive definite matrix.
pub fn spd_condition(m: &Mat<f64>) -> Result<f64> {
    let ev = symmetric_eigenvalues(m)?;
    let lo = ev.first().copied().unwrap_or(1.0);
    let hi = ev.last().copied().unwrap_or(1.0);
    if lo <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

/// Dense `a * b`.
pub fn dense_mul(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    a * b
}

pub fn dense_mul_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len());
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm_l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
