//! Dense row-major matrices.
//!
//! [`Matrix`] is an unconstrained real matrix used for gradients and
//! intermediate products. [`NonnegMatrix`] and [`Mask`] wrap it and enforce
//! the entrywise invariants of data/factor matrices and binary weight masks.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{Error, Result};

/// Default guard used by [`safe_div`] and the multiplicative updates.
pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    /// Builds a matrix from row-major entries. Rejects empty shapes, length
    /// mismatches and non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::BadShape { rows, cols, len: data.len() });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEntry {
                row: idx / cols,
                col: idx % cols,
                value: data[idx],
                reason: "not finite",
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::BadShape { rows: rows.len(), cols, len: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * other`. Panics if the inner dimensions disagree.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (p, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(p)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn tr_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "row counts differ");
        let mut out = Matrix::zeros(self.cols, other.cols);
        let n = other.cols;
        for p in 0..self.rows {
            let rhs = other.row(p);
            for (i, &a) in self.row(p).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * otherᵀ` without materializing the transpose.
    pub fn mul_tr(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "column counts differ");
        Matrix::from_fn(self.rows, other.rows, |i, j| self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b).sum())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Entrywise combination; panics on shape mismatch.
    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "shapes differ");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        self.map(|v| v * factor)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_shape(&self, operand: &'static str, expected: (usize, usize)) -> Result<()> {
        if self.shape() != expected {
            return Err(Error::Dimension { operand, expected, found: self.shape() });
        }
        Ok(())
    }
}

/// Dense matrix whose entries are all finite and `>= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix(Matrix);

impl NonnegMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows == 0 || m.cols == 0 {
            return Err(Error::BadShape { rows: m.rows, cols: m.cols, len: m.data.len() });
        }
        for (idx, &v) in m.data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    row: idx / m.cols,
                    col: idx % m.cols,
                    value: v,
                    reason: "must be finite and nonnegative",
                });
            }
        }
        Ok(NonnegMatrix(m))
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Matrix::from_vec(rows, cols, data)?)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        NonnegMatrix(Matrix::zeros(rows, cols))
    }

    /// Wraps a matrix known to satisfy the invariant (products and ratios of
    /// nonnegative operands).
    pub(crate) fn new_unchecked(m: Matrix) -> Self {
        debug_assert!(m.data.iter().all(|v| v.is_finite() && *v >= 0.0));
        NonnegMatrix(m)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub(crate) fn inner_mut(&mut self) -> &mut Matrix {
        &mut self.0
    }

    /// Product of two nonnegative matrices.
    pub fn product(&self, other: &NonnegMatrix) -> NonnegMatrix {
        NonnegMatrix(self.0.mul(&other.0))
    }
}

impl Deref for NonnegMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Matrix> for NonnegMatrix {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        NonnegMatrix::new(m)
    }
}

/// Binary weight matrix marking observed (1) and ignored (0) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask(Matrix);

impl Mask {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows == 0 || m.cols == 0 {
            return Err(Error::BadShape { rows: m.rows, cols: m.cols, len: m.data.len() });
        }
        for (idx, &v) in m.data.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::InvalidEntry {
                    row: idx / m.cols,
                    col: idx % m.cols,
                    value: v,
                    reason: "mask entries must be 0 or 1",
                });
            }
        }
        Ok(Mask(m))
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Mask(Matrix::filled(rows, cols, 1.0))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mask(Matrix::zeros(rows, cols))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        Mask(Matrix::from_fn(rows, cols, |i, j| if f(i, j) { 1.0 } else { 0.0 }))
    }

    #[inline]
    pub fn is_set(&self, i: usize, j: usize) -> bool {
        self.0.get(i, j) != 0.0
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Clears one entry; used to shrink the observed set.
    pub fn clear(&mut self, i: usize, j: usize) {
        self.0.set(i, j, 0.0);
    }

    /// `self ⊙ m`.
    pub fn apply(&self, m: &Matrix) -> Matrix {
        self.0.hadamard(m)
    }
}

impl Deref for Mask {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Entrywise `n / max(d, eps)`.
pub fn safe_div(n: &NonnegMatrix, d: &NonnegMatrix, eps: f64) -> Result<NonnegMatrix> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameter { name: "eps", reason: "must be positive" });
    }
    d.check_shape("denominator", n.shape())?;
    Ok(NonnegMatrix::new_unchecked(guarded_ratio(n, d, eps)))
}

#[inline]
pub(crate) fn guarded_ratio(n: &Matrix, d: &Matrix, eps: f64) -> Matrix {
    n.zip_map(d, |a, b| a / b.max(eps))
}

/// In place `theta ← theta ⊙ num / max(den, eps)`.
pub(crate) fn ratio_update(theta: &mut Matrix, num: &Matrix, den: &Matrix, eps: f64) {
    debug_assert_eq!(theta.shape(), num.shape());
    debug_assert_eq!(theta.shape(), den.shape());
    for ((t, &a), &b) in theta.as_mut_slice().iter_mut().zip(num.as_slice()).zip(den.as_slice()) {
        *t *= a / b.max(eps);
    }
}

/// Scales each column with positive sum to sum to one; zero columns stay zero.
pub fn col_normalize(m: &NonnegMatrix) -> NonnegMatrix {
    let sums: Vec<f64> = (0..m.cols()).map(|j| (0..m.rows()).map(|i| m.get(i, j)).sum()).collect();
    NonnegMatrix::new_unchecked(Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        let s = sums[j];
        if s > 0.0 {
            m.get(i, j) / s
        } else {
            m.get(i, j)
        }
    }))
}
