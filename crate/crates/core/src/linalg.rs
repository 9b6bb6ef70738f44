//! Dense vector and matrix arithmetic sized for desk-scale experiments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SimRng;

/// Largest system accepted by [`solve_small_linear`].
pub const MAX_SOLVE_DIM: usize = 16;
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("vector must have positive dimension")]
    EmptyVector,
    #[error("non-finite entry {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch at index {index}: expected {expected}, found {found}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("coefficient list has length {coeffs} but vector list has length {vectors}")]
    LengthMismatch { coeffs: usize, vectors: usize },
    #[error("combination needs at least one vector")]
    EmptyCombination,
    #[error("matrix data has length {len}, expected {rows}x{cols}")]
    BadShape {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("system of dimension {dim} exceeds the small-solve limit of {MAX_SOLVE_DIM}")]
    TooLarge { dim: usize },
    #[error("matrix is singular to tolerance: smallest pivot {pivot:e}")]
    Singular { pivot: f64 },
    #[error("finite-difference step must be positive, got {h}")]
    BadStep { h: f64 },
    #[error("objective is not finite at coordinate {coordinate}")]
    NonFiniteValue { coordinate: usize },
}

/// A worker's parameter point, flattened. Matrix variables are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Checked constructor: nonempty and all entries finite.
    pub fn new(data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.is_empty() {
            return Err(LinalgError::EmptyVector);
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LinalgError::NonFinite { index, value });
        }
        Ok(Self(data))
    }

    /// Wraps data produced by library arithmetic. Finiteness is checked by the callers
    /// that can diverge (the simulator guards every step).
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        Self(data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_raw(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        Self::from_raw(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        Self::from_raw(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, c: f64) -> ParamVector {
        Self::from_raw(self.0.iter().map(|v| c * v).collect())
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn check_same_dim(
        &self,
        other: &ParamVector,
        index: usize,
    ) -> Result<(), LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                index,
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl From<f64> for ParamVector {
    fn from(v: f64) -> Self {
        Self::from_raw(vec![v])
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns `Σ coeffs[i] · vectors[i]`.
pub fn axpy_combine(coeffs: &[f64], vectors: &[&ParamVector]) -> Result<ParamVector, LinalgError> {
    if coeffs.len() != vectors.len() {
        return Err(LinalgError::LengthMismatch {
            coeffs: coeffs.len(),
            vectors: vectors.len(),
        });
    }
    let first = vectors.first().ok_or(LinalgError::EmptyCombination)?;
    for (i, v) in vectors.iter().enumerate().skip(1) {
        first.check_same_dim(v, i)?;
    }
    let mut out = vec![0.0; first.dim()];
    for (c, v) in coeffs.iter().zip(vectors) {
        for (o, x) in out.iter_mut().zip(v.as_slice()) {
            *o += c * x;
        }
    }
    Ok(ParamVector::from_raw(out))
}

/// Central-difference gradient `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn finite_diff_gradient<F>(f: F, x: &ParamVector, h: f64) -> Result<ParamVector, LinalgError>
where
    F: Fn(&ParamVector) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(LinalgError::BadStep { h });
    }
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let xi = x.as_slice()[i];
        probe.as_mut_slice()[i] = xi + h;
        let plus = f(&probe);
        probe.as_mut_slice()[i] = xi - h;
        let minus = f(&probe);
        probe.as_mut_slice()[i] = xi;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(LinalgError::NonFiniteValue { coordinate: i });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(ParamVector::from_raw(grad))
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    symmetric: bool,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(LinalgError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            data,
            symmetric: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::BadShape {
                rows: r,
                cols: c,
                len: data.len(),
            });
        }
        Self::new(r, c, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self {
            rows: n,
            cols: n,
            data,
            symmetric: true,
        }
    }

    /// Builds a symmetric matrix from the upper triangle of `entry(i, j)`, `i <= j`,
    /// mirroring so that `A_ij == A_ji` exactly.
    pub fn symmetric_from_fn(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = entry(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self {
            rows: n,
            cols: n,
            data,
            symmetric: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
            symmetric: self.symmetric,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                index: 1,
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let out = &mut data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        DenseMatrix::new(self.rows, other.cols, data)
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `A + shift · I`.
    pub fn shifted(&self, shift: f64) -> DenseMatrix {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            out.data[i * self.cols + i] += shift;
        }
        out
    }
}

/// Partial-pivot Gaussian elimination for systems of dimension at most [`MAX_SOLVE_DIM`].
pub fn solve_small_linear(a: &DenseMatrix, b: &ParamVector) -> Result<ParamVector, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if n > MAX_SOLVE_DIM {
        return Err(LinalgError::TooLarge { dim: n });
    }
    if b.dim() != n {
        return Err(LinalgError::DimensionMismatch {
            index: 1,
            expected: n,
            found: b.dim(),
        });
    }
    let mut m = a.data().to_vec();
    let mut rhs = b.as_slice().to_vec();
    let mut smallest_pivot = f64::INFINITY;
    for col in 0..n {
        let (pivot_row, pivot_abs) =
            (col..n)
                .map(|r| (r, m[r * n + col].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        smallest_pivot = smallest_pivot.min(pivot_abs);
        if pivot_abs <= PIVOT_TOLERANCE {
            return Err(LinalgError::Singular { pivot: pivot_abs });
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[col * n + col];
        for r in col + 1..n {
            let factor = m[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= factor * m[col * n + j];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|j| m[i * n + j] * x[j]).sum();
        x[i] = (rhs[i] - tail) / m[i * n + i];
    }
    debug_assert!(smallest_pivot > PIVOT_TOLERANCE);
    Ok(ParamVector::from_raw(x))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as the
/// columns of the returned matrix.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let mut m = a.data().to_vec();
    let mut v = DenseMatrix::identity(n).data;
    let scale: f64 = m
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[k * n + new_col] = v[k * n + old_col];
        }
    }
    Ok((values, DenseMatrix::new(n, n, vectors)?))
}

/// Haar-ish random rotation: Gram–Schmidt on a Gaussian matrix. Columns are orthonormal.
pub fn random_orthogonal(n: usize, rng: &mut SimRng) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        for _ in 0..2 {
            for c in &cols {
                let proj = dot(&v, c);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    let mut data = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            data[i * n + j] = c[i];
        }
    }
    DenseMatrix {
        rows: n,
        cols: n,
        data,
        symmetric: false,
    }
}
