//! Dense linear algebra for the small-to-moderate covariance blocks that
//! appear in SUN parameters (p×p, n×n and (n+p)×(n+p) matrices).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{bail, Error, Result};

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            bail!(DimensionMismatch, "{} entries for a {rows}x{cols} matrix", data.len());
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                bail!(DimensionMismatch, "ragged rows: {} vs {cols}", r.len());
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
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

    /// A single column vector.
    pub fn column(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            bail!(DimensionMismatch, "cannot multiply {}x{} by {}x{}", self.rows, self.cols, other.rows, other.cols);
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            bail!(DimensionMismatch, "vector of length {} for {} columns", v.len(), self.cols);
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            bail!(DimensionMismatch, "vector of length {} for {} rows", v.len(), self.rows);
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let cols: Vec<usize> = (0..self.cols).collect();
        self.select(rows, &cols)
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.select(&rows, cols)
    }

    /// `diag(s) · self`.
    pub fn scale_rows(&self, s: &[f64]) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| s[i] * self[(i, j)])
    }

    /// `self · diag(s)`.
    pub fn scale_cols(&self, s: &[f64]) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s[j])
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| c * x).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            bail!(DimensionMismatch, "{}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols);
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows > 0 && other.rows > 0 && self.cols != other.cols {
            bail!(DimensionMismatch, "vstack of {} and {} columns", self.cols, other.cols);
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix { rows: self.rows + other.rows, cols, data })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square symmetric matrix. Construction checks symmetry to 1e-12 relative
/// to the largest entry and then stores the exactly symmetrised `(m+mᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

const SYMMETRY_TOL: f64 = 1e-12;

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            bail!(DimensionMismatch, "symmetric matrix must be square, got {}x{}", m.rows, m.cols);
        }
        if m.rows == 0 {
            bail!(DimensionMismatch, "symmetric matrix must have dimension >= 1");
        }
        if !m.is_finite() {
            bail!(InvalidArgument, "matrix has non-finite entries");
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..m.rows {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    bail!(InvalidArgument, "matrix is not symmetric at ({i},{j})");
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrises without checking; for matrices assembled from products
    /// that are symmetric in exact arithmetic.
    pub fn symmetrized(mut m: Matrix) -> Self {
        debug_assert!(m.is_square());
        for i in 0..m.rows {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// The 0×0 matrix, used for the latent block of a SUN with no
    /// truncation coordinates (the Gaussian special case).
    pub fn empty() -> Self {
        SymMatrix(Matrix::zeros(0, 0))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(Matrix::identity(dim))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        SymMatrix(Matrix::from_diag(diag))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn diag(&self) -> Vec<f64> {
        self.0.diag()
    }

    pub fn select(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix(self.0.select(idx, idx))
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix(self.0.scaled(c))
    }

    /// `diag(s) · self · diag(s)`.
    pub fn scale_both(&self, s: &[f64]) -> SymMatrix {
        SymMatrix(Matrix::from_fn(self.dim(), self.dim(), |i, j| s[i] * self.0[(i, j)] * s[j]))
    }

    /// Quadratic form `vᵀ self v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        (0..self.dim()).map(|i| v[i] * dot(self.0.row(i), v)).sum()
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Diagonal jitter escalation used when a factorisation fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub max_attempts: u32,
    /// First jitter is `base_scale · mean(diag)`; it grows ×10 per attempt.
    pub base_scale: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, base_scale: 1e-10 }
    }
}

impl JitterPolicy {
    pub const NONE: JitterPolicy = JitterPolicy { max_attempts: 0, base_scale: 0.0 };
}

/// Lower Cholesky factor of `source + jitter_applied · I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    pub lower: Matrix,
    pub jitter_applied: f64,
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.lower;
        let n = l.rows;
        let mut x = b.to_vec();
        for i in 0..n {
            let s = dot(&l.row(i)[..i], &x[..i]);
            x[i] = (x[i] - s) / l[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.lower;
        let n = l.rows;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        x
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn solve_matrix(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(rhs.rows, rhs.cols);
        for j in 0..rhs.cols {
            let x = self.solve(&rhs.col(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> SymMatrix {
        SymMatrix::symmetrized(self.solve_matrix(&Matrix::identity(self.dim())))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diag().iter().map(|d| libm::log(*d)).sum::<f64>()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.lower.matmul(&self.lower.transpose()).expect("square factor")
    }
}

fn try_cholesky(m: &Matrix, jitter: f64) -> core::result::Result<Matrix, usize> {
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)] + jitter;
        d -= l.row(j)[..j].iter().map(|x| x * x).sum::<f64>();
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let djj = libm::sqrt(d);
        l[(j, j)] = djj;
        for i in j + 1..n {
            let s = m[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Cholesky factorisation with diagonal jitter escalation.
pub fn cholesky(m: &SymMatrix, policy: JitterPolicy) -> Result<CholFactor> {
    let a = m.matrix();
    let mut pivot = match try_cholesky(a, 0.0) {
        Ok(lower) => return Ok(CholFactor { lower, jitter_applied: 0.0 }),
        Err(p) => p,
    };
    let n = m.dim();
    let mean_diag = if n == 0 { 0.0 } else { a.diag().iter().sum::<f64>() / n as f64 };
    let mut jitter = policy.base_scale * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for _ in 0..policy.max_attempts {
        match try_cholesky(a, jitter) {
            Ok(lower) => return Ok(CholFactor { lower, jitter_applied: jitter }),
            Err(p) => pivot = p,
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite { pivot })
}

/// Factorisation of a positive semi-definite matrix: pivots below
/// `1e-12 · max(diag)` are treated as exact zeros and their column is
/// zeroed, so `L Lᵀ` reproduces `m` on its range.
pub fn cholesky_psd(m: &SymMatrix) -> Result<CholFactor> {
    let a = m.matrix();
    let n = m.dim();
    let scale = a.diag().iter().fold(0.0_f64, |acc, d| acc.max(*d));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] - l.row(j)[..j].iter().map(|x| x * x).sum::<f64>();
        if d < -1e-8 * scale.max(1.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        if d <= tol {
            continue;
        }
        let djj = libm::sqrt(d);
        l[(j, j)] = djj;
        for i in j + 1..n {
            l[(i, j)] = (a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j])) / djj;
        }
    }
    Ok(CholFactor { lower: l, jitter_applied: 0.0 })
}

/// Splits a covariance into standard deviations ω and correlation Ω̄ with
/// `ω Ω̄ ω = m`.
pub fn correlation_decompose(m: &SymMatrix) -> Result<(Vec<f64>, SymMatrix)> {
    let diag = m.diag();
    if let Some(pivot) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NotPositiveDefinite { pivot });
    }
    let omega: Vec<f64> = diag.iter().map(|d| libm::sqrt(*d)).collect();
    let n = m.dim();
    let corr = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { m[(i, j)] / (omega[i] * omega[j]) });
    Ok((omega, SymMatrix::symmetrized(corr)))
}

/// Solves `m · X = rhs` for symmetric positive definite `m`.
pub fn solve_spd(m: &SymMatrix, rhs: &Matrix) -> Result<Matrix> {
    if rhs.rows != m.dim() {
        bail!(DimensionMismatch, "rhs has {} rows, matrix is {}", rhs.rows, m.dim());
    }
    let chol = cholesky(m, JitterPolicy::NONE)?;
    Ok(chol.solve_matrix(rhs))
}

/// Gaussian elimination with partial pivoting for a general square system.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_general(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows;
    debug_assert!(a.is_square() && b.len() == n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs();
    if scale == 0.0 {
        return None;
    }
    for k in 0..n {
        let (piv, pmax) =
            (k..n).map(|i| (i, m[(i, k)].abs())).fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if pmax <= 1e-300 || pmax < 1e-15 * scale {
            return None;
        }
        if piv != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(k, piv);
        }
        let d = m[(k, k)];
        for i in k + 1..n {
            let f = m[(i, k)] / d;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[(i, j)] -= f * m[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let s = dot(&m.row(i)[i + 1..], &x[i + 1..]);
        x[i] = (x[i] - s) / m[(i, i)];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
