//! Row-major dense matrices with the handful of operations the compression
//! algorithms need: products, unit-triangular solves and norms.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values for {rows}x{cols}", rows * cols),
                found: data.len().to_string(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Rows selected by `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, data }
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    /// Stack `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(mismatch("equal column counts", self, other));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Rows `start..end`.
    pub fn row_range(&self, start: usize, end: usize) -> Self {
        Self { rows: end - start, cols: self.cols, data: self.data[start * self.cols..end * self.cols].to_vec() }
    }

    pub fn scale_mut(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(mismatch("equal shapes", self, other));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `y += alpha * self * x`
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row(i);
            let mut s = 0.0;
            for (a, b) in r.iter().zip(x) {
                s += a * b;
            }
            *yi += alpha * s;
        }
    }

    /// `y += alpha * self^T * x`
    pub fn gemv_transposed(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, xi) in x.iter().enumerate() {
            let a = alpha * xi;
            if a == 0.0 {
                continue;
            }
            for (yj, r) in y.iter_mut().zip(self.row(i)) {
                *yj += a * r;
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.gemv(1.0, x, &mut y);
        y
    }

    pub fn matvec_transposed(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        self.gemv_transposed(1.0, x, &mut y);
        y
    }

    pub fn bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
}

fn mismatch(what: &str, a: &DenseMatrix, b: &DenseMatrix) -> Error {
    Error::DimensionMismatch {
        expected: what.to_string(),
        found: format!("{}x{} and {}x{}", a.rows, a.cols, b.rows, b.cols),
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `A * B`
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(mismatch("a.cols == b.rows", a, b));
    }
    let mut c = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let ci = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for (k, aik) in a.row(i).iter().enumerate() {
            if *aik == 0.0 {
                continue;
            }
            for (cij, bkj) in ci.iter_mut().zip(b.row(k)) {
                *cij += aik * bkj;
            }
        }
    }
    Ok(c)
}

/// `A * B^T`
pub fn matmul_transposed(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(mismatch("a.cols == b.cols", a, b));
    }
    Ok(DenseMatrix::from_fn(a.rows, b.rows, |i, j| a.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum()))
}

/// Solve `L X = B` for unit lower triangular `L`; the strict upper part and
/// the diagonal of `L` are not read.
pub fn forward_substitution(l: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    if l.rows != l.cols || l.rows != rhs.rows {
        return Err(mismatch("square L matching the right-hand side", l, rhs));
    }
    let mut x = rhs.clone();
    let c = x.cols;
    for i in 0..l.rows {
        for k in 0..i {
            let lik = l[(i, k)];
            if lik == 0.0 {
                continue;
            }
            let (head, tail) = x.data.split_at_mut(i * c);
            let xk = &head[k * c..(k + 1) * c];
            for (xi, v) in tail[..c].iter_mut().zip(xk) {
                *xi -= lik * v;
            }
        }
    }
    Ok(x)
}

/// Solve `X L = B` for unit lower triangular `L`.
pub fn solve_unit_lower_right(l: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    if l.rows != l.cols || l.cols != rhs.cols {
        return Err(mismatch("square L matching the right-hand side columns", l, rhs));
    }
    let n = l.rows;
    let mut x = rhs.clone();
    for r in 0..x.rows {
        let row = x.row_mut(r);
        for j in (0..n).rev() {
            let v = row[j];
            if v == 0.0 {
                continue;
            }
            for k in 0..j {
                row[k] -= v * l[(j, k)];
            }
        }
    }
    Ok(x)
}

/// Unit lower triangular product `L X`, reading only the strict lower part.
pub fn unit_lower_multiply(l: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if l.rows != l.cols || l.cols != x.rows {
        return Err(mismatch("square L matching X", l, x));
    }
    let mut y = x.clone();
    for i in 0..l.rows {
        for k in 0..i {
            let lik = l[(i, k)];
            for j in 0..x.cols {
                y[(i, j)] += lik * x[(k, j)];
            }
        }
    }
    Ok(y)
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||A - B||_2` by power iteration on the difference.
pub fn spectral_error(a: &DenseMatrix, b: &DenseMatrix, iters: usize) -> Result<f64> {
    let d = a.sub(b)?;
    crate::crossapprox::estimate_norm2(&d, iters)
}

/// A linear map that can be applied and transposed, for norm estimates.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = A^T x`
    fn apply_transposed(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.gemv(1.0, x, y);
    }

    fn apply_transposed(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.gemv_transposed(1.0, x, y);
    }
}
