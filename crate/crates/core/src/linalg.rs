//! Dense column-major matrix and the handful of kernels the estimators need.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self::from_fn(rows, cols, |i, j| data[i * cols + j]))
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn swap_columns(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let r = self.rows;
        let (left, right) = self.data.split_at_mut(hi * r);
        left[lo * r..(lo + 1) * r].swap_with_slice(&mut right[..r]);
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for j in 0..self.cols {
            let c = self.col(j);
            data.extend(rows.iter().map(|&i| c[i]));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        Self {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    /// `X b`
    pub fn mul_vec(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                axpy(bj, self.col(j), &mut out);
            }
        }
        out
    }

    /// `X^T v`
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }

    /// Row Gram matrix `X X^T` (n x n, symmetric, column-major).
    pub fn row_gram(&self) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        // Upper triangle through rank-one column updates, then mirror.
        for j in 0..self.cols {
            let c = self.col(j);
            for (k, &a) in c.iter().enumerate() {
                if a != 0.0 {
                    let dst = &mut g.data[k * n..k * n + k + 1];
                    for (d, &x) in dst.iter_mut().zip(&c[..=k]) {
                        *d += a * x;
                    }
                }
            }
        }
        for k in 0..n {
            for i in 0..k {
                g.data[i * n + k] = g.data[k * n + i];
            }
        }
        g
    }

    /// Subtracts each column mean; returns the removed means.
    pub fn center_columns(&mut self) -> Vec<f64> {
        let n = self.rows as f64;
        (0..self.cols)
            .map(|j| {
                let c = self.col_mut(j);
                let m = c.iter().sum::<f64>() / n;
                c.iter_mut().for_each(|x| *x -= m);
                m
            })
            .collect()
    }

    /// Sum of squared entries.
    pub fn frobenius_sq(&self) -> f64 {
        norm_sq(&self.data)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let quad = [acc[0] + acc[4], acc[1] + acc[5], acc[2] + acc[6], acc[3] + acc[7]];
    (quad[0] + quad[1]) + (quad[2] + quad[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Matrix,
}

pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in symmetric matrix".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(a.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &k) in order.iter().enumerate() {
        vectors
            .col_mut(dst)
            .copy_from_slice(eig.eigenvectors.column(k).as_slice());
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Residual sum of squares and numerical rank of a least-squares fit.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub rss: f64,
    pub rank: usize,
}

/// Solves `min ||y - X b||` by Householder QR with pivoting on the largest
/// remaining column norm. Elimination stops once every remaining column norm
/// is below `eps * max(m, p)` times the largest column norm of `X`, which is
/// the numerical rank; the residual is then that of the projection on the
/// span of the accepted columns.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<LeastSquares> {
    let (m, p) = (x.rows(), x.cols());
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: y.len(),
        });
    }
    let mut a = x.clone();
    let mut qty = y.to_vec();
    let scale = (0..p).map(|j| sqrt(norm_sq(x.col(j)))).fold(0.0, f64::max);
    let tol = scale * f64::EPSILON * m.max(p) as f64;
    let mut rank = 0;
    for k in 0..m.min(p) {
        let (best, norm) = (k..p)
            .map(|j| (j, sqrt(norm_sq(&a.col(j)[k..]))))
            .fold((k, -1.0), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        if !(norm > tol) {
            break;
        }
        a.swap_columns(k, best);
        let mut v = a.col(k)[k..].to_vec();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vv = norm_sq(&v);
        if vv > 0.0 {
            for j in k + 1..p {
                let col = &mut a.col_mut(j)[k..];
                let f = 2.0 * dot(&v, col) / vv;
                axpy(-f, &v, col);
            }
            let f = 2.0 * dot(&v, &qty[k..]) / vv;
            axpy(-f, &v, &mut qty[k..]);
        }
        rank += 1;
    }
    Ok(LeastSquares {
        rss: norm_sq(&qty[rank..]),
        rank,
    })
}
