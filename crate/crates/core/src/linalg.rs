//! Small dense complex linear algebra.
//!
//! Everything here targets the matrix sizes that appear in Bloch and
//! parametric Hamiltonians (N ≤ 16): Hamiltonians, Pauli matrices, eigenframes
//! and overlap matrices between frames. Storage is a flat row-major `Vec`.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::scalar::Real;

/// Sweep cap for the cyclic Jacobi eigensolver.
pub const MAX_JACOBI_SWEEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is not Hermitian: |H - H^dagger|_F = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("matrix is singular or nearly so (smallest singular value {smallest_singular_value:e})")]
    Singular { smallest_singular_value: f64 },
    #[error("entry buffer of length {len} does not match shape {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from rows of equal length.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn column_vector(entries: &[Complex<T>]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            data: entries.to_vec(),
        }
    }

    pub fn diagonal(entries: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn real_diagonal(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = Complex::new(e, T::zero());
        }
        m
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    /// Columns `start..start + count` as a new matrix.
    pub fn columns(&self, start: usize, count: usize) -> Self {
        assert!(start + count <= self.cols, "column range out of bounds");
        Self::from_fn(self.rows, count, |i, j| self[(i, start + j)])
    }

    pub fn column(&self, j: usize) -> Self {
        self.columns(j, 1)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self† · other` without materializing the adjoint.
    pub fn adjoint_mul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.rows != other.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "adjoint_mul",
                left: (self.cols, self.rows),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i].conj();
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> Result<Complex<T>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                op: "trace",
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).fold(Complex::zero(), |a, b| a + b))
    }

    pub fn fro_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn det(&self) -> Result<Complex<T>, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                op: "det",
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        match n {
            0 => return Ok(Complex::one()),
            1 => return Ok(self.data[0]),
            2 => return Ok(self.data[0] * self.data[3] - self.data[1] * self.data[2]),
            _ => {}
        }
        let mut a = self.data.clone();
        let mut det = Complex::one();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| {
                    a[x * n + col]
                        .norm_sqr()
                        .partial_cmp(&a[y * n + col].norm_sqr())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(col);
            if a[pivot * n + col].is_zero() {
                return Ok(Complex::zero());
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                if factor.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= factor * v;
                }
            }
        }
        Ok(det)
    }

    /// Frobenius norm of `self - self†`.
    pub fn hermiticity_deviation(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let n = self.rows;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Frobenius distance to another matrix of the same shape.
    pub fn distance(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "distance: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc + (*a - *b).norm_sqr())
            .sqrt()
    }

    /// `‖A†A − I‖_F`.
    pub fn unitarity_deviation(&self) -> T {
        match self.adjoint_mul(self) {
            Ok(g) => g.distance(&Self::identity(self.cols)),
            Err(_) => T::infinity(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix product; panics on a shape mismatch. Use [`CMatrix::matmul`] for a
/// checked product.
impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Real> Neg for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn neg(self) -> CMatrix<T> {
        self.map(|z| -z)
    }
}

pub fn matmul<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>, LinalgError> {
    a.matmul(b)
}

pub fn adjoint<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    a.adjoint()
}

pub fn det<T: Real>(a: &CMatrix<T>) -> Result<Complex<T>, LinalgError> {
    a.det()
}

pub fn trace<T: Real>(a: &CMatrix<T>) -> Result<Complex<T>, LinalgError> {
    a.trace()
}

pub fn fro_norm<T: Real>(a: &CMatrix<T>) -> T {
    a.fro_norm()
}

/// Pauli matrix σ_x (`index == 1`), σ_y (2) or σ_z (3); index 0 is the identity.
pub fn pauli<T: Real>(index: usize) -> CMatrix<T> {
    let o = T::zero();
    let l = T::one();
    let c = |re, im| Complex::new(re, im);
    let data = match index {
        0 => vec![c(l, o), c(o, o), c(o, o), c(l, o)],
        1 => vec![c(o, o), c(l, o), c(l, o), c(o, o)],
        2 => vec![c(o, o), c(o, -l), c(o, l), c(o, o)],
        3 => vec![c(l, o), c(o, o), c(o, o), c(-l, o)],
        _ => panic!("Pauli index must be 0..=3, got {index}"),
    };
    CMatrix {
        rows: 2,
        cols: 2,
        data,
    }
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermEig<T> {
    /// Eigenvalues, ascending.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermEig<T> {
    /// `(‖V†V − I‖_F, ‖HV − V·diag(E)‖_F)`.
    pub fn residuals(&self, h: &CMatrix<T>) -> (T, T) {
        let orth = self.vectors.unitarity_deviation();
        let hv = h * &self.vectors;
        let vd = &self.vectors
            * &CMatrix::real_diagonal(&self.values);
        (orth, hv.distance(&vd))
    }

    /// `V·diag(E)·V†`.
    pub fn reconstruct(&self) -> CMatrix<T> {
        let vd = &self.vectors * &CMatrix::real_diagonal(&self.values);
        &vd * &self.vectors.adjoint()
    }
}

/// Diagonalizes a Hermitian matrix.
///
/// 2×2 input uses the closed form `E± = ε ± |d|` of `H = ε·1 + d·σ`; larger
/// input uses cyclic complex Jacobi rotations driven to machine precision.
/// `tol` is relative to `‖H‖_F` and bounds both the accepted anti-Hermitian
/// part and the accepted off-diagonal remainder.
pub fn eig_hermitian<T: Real>(h: &CMatrix<T>, tol: T) -> Result<HermEig<T>, LinalgError> {
    if !h.is_square() {
        return Err(LinalgError::NotSquare {
            op: "eig_hermitian",
            rows: h.rows,
            cols: h.cols,
        });
    }
    let norm = h.fro_norm();
    let deviation = h.hermiticity_deviation();
    if deviation > tol * norm {
        return Err(LinalgError::NotHermitian {
            deviation: deviation.as_f64(),
        });
    }
    match h.rows {
        0 => Ok(HermEig {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        }),
        1 => Ok(HermEig {
            values: vec![h.data[0].re],
            vectors: CMatrix::identity(1),
        }),
        2 => Ok(eig_two_by_two(h)),
        _ => eig_jacobi(h, tol, norm),
    }
}

fn eig_two_by_two<T: Real>(h: &CMatrix<T>) -> HermEig<T> {
    let half = T::lit(0.5);
    let a = h.data[0].re;
    let b = h.data[3].re;
    let z = (h.data[1] + h.data[2].conj()) * half;
    let eps = (a + b) * half;
    let d3 = (a - b) * half;
    let d1 = z.re;
    let d2 = -z.im;
    let r = (d1 * d1 + d2 * d2 + d3 * d3).sqrt();
    if r.is_zero() {
        return HermEig {
            values: vec![eps, eps],
            vectors: CMatrix::identity(2),
        };
    }
    let zero = T::zero();
    // Pick the branch that avoids cancellation in |d| ± d3.
    let (upper, lower) = if d3 >= zero {
        let s = r + d3;
        let nrm = ((r + r) * s).sqrt();
        (
            [Complex::new(s / nrm, zero), Complex::new(d1 / nrm, d2 / nrm)],
            [Complex::new(-d1 / nrm, d2 / nrm), Complex::new(s / nrm, zero)],
        )
    } else {
        let s = r - d3;
        let nrm = ((r + r) * s).sqrt();
        (
            [Complex::new(d1 / nrm, -d2 / nrm), Complex::new(s / nrm, zero)],
            [Complex::new(-s / nrm, zero), Complex::new(d1 / nrm, d2 / nrm)],
        )
    };
    HermEig {
        values: vec![eps - r, eps + r],
        vectors: CMatrix {
            rows: 2,
            cols: 2,
            data: vec![lower[0], upper[0], lower[1], upper[1]],
        },
    }
}

fn off_diagonal_norm<T: Real>(a: &[Complex<T>], n: usize) -> T {
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[i * n + j].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn eig_jacobi<T: Real>(h: &CMatrix<T>, tol: T, norm: T) -> Result<HermEig<T>, LinalgError> {
    let n = h.rows;
    // Work on the Hermitian part so round-off asymmetry does not accumulate.
    let mut a = CMatrix::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * T::lit(0.5)).data;
    let mut v = CMatrix::<T>::identity(n).data;
    let target = T::epsilon() * norm;
    let mut off = off_diagonal_norm(&a, n);
    let mut sweeps = 0;
    while off > target && sweeps < MAX_JACOBI_SWEEPS {
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r <= T::min_positive_value() {
                    continue;
                }
                let phase = apq / r;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let zeta = (aqq - app) / (r + r);
                let t = if zeta.is_zero() {
                    T::one()
                } else {
                    zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let jpp = Complex::new(c, T::zero());
                let jpq = Complex::new(s, T::zero());
                let jqp = phase.conj() * (-s);
                let jqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * jpp + akq * jqp;
                    a[k * n + q] = akp * jpq + akq * jqq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[q * n + k] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[p * n + q] = Complex::zero();
                a[q * n + p] = Complex::zero();
                a[p * n + p] = Complex::new(a[p * n + p].re, T::zero());
                a[q * n + q] = Complex::new(a[q * n + q].re, T::zero());
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * jpp + vkq * jqp;
                    v[k * n + q] = vkp * jpq + vkq * jqq;
                }
            }
        }
        off = off_diagonal_norm(&a, n);
    }
    if off > tol * norm {
        return Err(LinalgError::NoConvergence {
            sweeps,
            residual: off.as_f64(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        a[x * n + x]
            .re
            .partial_cmp(&a[y * n + y].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[i * n + order[j]]);
    Ok(HermEig { values, vectors })
}

/// Unitary polar factor `U` of `m = U·P` with `P` positive definite.
///
/// `U` is the unitary nearest to `m` in Frobenius norm. Fails when the
/// smallest singular value of `m` is at or below `sing_tol`.
pub fn unitary_align<T: Real>(m: &CMatrix<T>, sing_tol: T) -> Result<CMatrix<T>, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare {
            op: "unitary_align",
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    if n == 1 {
        let z = m.data[0];
        let r = z.norm();
        if !(r > sing_tol) {
            return Err(LinalgError::Singular {
                smallest_singular_value: r.as_f64(),
            });
        }
        return Ok(CMatrix::column_vector(&[z / r]));
    }
    let gram = m.adjoint_mul(m)?;
    let gram = CMatrix::from_fn(n, n, |i, j| (gram[(i, j)] + gram[(j, i)].conj()) * T::lit(0.5));
    let eig = eig_hermitian(&gram, T::DEFAULT_TOL.max(T::epsilon().sqrt()))?;
    let smallest = eig.values[0].max(T::zero()).sqrt();
    if !(smallest > sing_tol) {
        return Err(LinalgError::Singular {
            smallest_singular_value: smallest.as_f64(),
        });
    }
    let inv_sqrt: Vec<T> = eig.values.iter().map(|&s| T::one() / s.sqrt()).collect();
    let w = &eig.vectors * &CMatrix::real_diagonal(&inv_sqrt);
    let p_inv = &w * &eig.vectors.adjoint();
    let u = m * &p_inv;
    // One Newton-Schulz step: U ← U(3I − U†U)/2.
    let correction = &CMatrix::identity(n).scale_real(T::lit(3.0)) - &u.adjoint_mul(&u)?;
    Ok((&u * &correction).scale_real(T::lit(0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type M = CMatrix<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn random_hermitian(n: usize, entries: &[f64]) -> M {
        let mut h = M::zeros(n, n);
        let mut it = entries.iter().copied().cycle();
        for i in 0..n {
            h[(i, i)] = c(it.next().unwrap(), 0.0);
            for j in i + 1..n {
                let z = c(it.next().unwrap(), it.next().unwrap());
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    fn random_unitary(n: usize, entries: &[f64]) -> M {
        let mut it = entries.iter().copied().cycle();
        let m = M::from_fn(n, n, |i, j| {
            let z = c(it.next().unwrap(), it.next().unwrap());
            if i == j {
                z + c(2.0, 0.0)
            } else {
                z
            }
        });
        unitary_align(&m, 1e-8).unwrap()
    }

    #[test]
    fn pauli_products() {
        let (i2, sx, sy, sz) = (pauli::<f64>(0), pauli(1), pauli(2), pauli(3));
        assert_eq!(matmul(&i2, &sx).unwrap(), sx);
        assert_eq!(matmul(&sx, &sx).unwrap(), i2);
        assert_eq!(matmul(&sx, &sy).unwrap(), sz.scale(c(0.0, 1.0)));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = M::zeros(2, 3);
        let b = M::zeros(2, 3);
        assert!(matches!(
            matmul(&a, &b),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn adjoint_examples() {
        let sy = pauli::<f64>(2);
        assert_eq!(adjoint(&sy), sy);
        let di = M::diagonal(&[c(0.0, 1.0), c(0.0, 1.0)]);
        assert_eq!(adjoint(&di), M::diagonal(&[c(0.0, -1.0), c(0.0, -1.0)]));
        let a = M::from_fn(2, 3, |i, j| c(i as f64, j as f64 - 1.0));
        assert_eq!(adjoint(&adjoint(&a)), a);
    }

    #[test]
    fn det_trace_norm() {
        assert_eq!(det(&M::identity(3)).unwrap(), c(1.0, 0.0));
        assert_eq!(trace(&pauli::<f64>(3)).unwrap(), c(0.0, 0.0));
        assert!((fro_norm(&pauli::<f64>(1)) - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(trace(&M::zeros(2, 3)), Err(LinalgError::NotSquare { .. })));
        assert!(matches!(det(&M::zeros(3, 2)), Err(LinalgError::NotSquare { .. })));
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let a = M::from_rows(&[
            vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0)],
            vec![c(0.5, 0.0), c(-1.0, 2.0), c(3.0, 0.0)],
            vec![c(0.0, 2.0), c(1.0, -1.0), c(2.0, 0.5)],
        ]);
        let m = |i: usize, j: usize| a[(i, j)];
        let cof = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        assert!((det(&a).unwrap() - cof).norm() < 1e-12);
    }

    #[test]
    fn eig_sigma_z() {
        let e = eig_hermitian(&pauli::<f64>(3), 1e-10).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_identity_is_degenerate() {
        let e = eig_hermitian(&M::identity(2), 1e-10).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert!(e.vectors.unitarity_deviation() < 1e-15);
    }

    #[test]
    fn eig_sigma_x_plus_three_sigma_z() {
        // Characteristic polynomial λ² − (1 + 9) = 0 ⇒ λ = ±√10.
        let h = &pauli::<f64>(1) + &pauli::<f64>(3).scale_real(3.0);
        let e = eig_hermitian(&h, 1e-10).unwrap();
        assert!((e.values[0] + 10f64.sqrt()).abs() < 1e-14);
        assert!((e.values[1] - 10f64.sqrt()).abs() < 1e-14);
        let (orth, res) = e.residuals(&h);
        assert!(orth < 1e-14 && res < 1e-13);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut h = pauli::<f64>(1);
        h[(0, 1)] = c(2.0, 0.0);
        assert!(matches!(
            eig_hermitian(&h, 1e-10),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn jacobi_handles_degenerate_block() {
        let h = M::real_diagonal(&[2.0, -1.0, 2.0, -1.0]);
        let e = eig_hermitian(&h, 1e-10).unwrap();
        assert_eq!(e.values, vec![-1.0, -1.0, 2.0, 2.0]);
        let (orth, res) = e.residuals(&h);
        assert!(orth < 1e-14 && res < 1e-14);
    }

    #[test]
    fn align_unitary_is_fixed_point() {
        let u = random_unitary(3, &[0.3, -0.7, 0.1, 0.9, -0.2, 0.4, 0.5]);
        let v = unitary_align(&u, 1e-8).unwrap();
        assert!(u.distance(&v) < 1e-13);
    }

    #[test]
    fn align_removes_positive_scaling() {
        let m = M::identity(2).scale_real(0.5);
        assert!(unitary_align(&m, 1e-8).unwrap().distance(&M::identity(2)) < 1e-15);
    }

    #[test]
    fn align_rejects_singular() {
        let m = M::real_diagonal(&[1.0, 1e-12]);
        match unitary_align(&m, 1e-8) {
            Err(LinalgError::Singular {
                smallest_singular_value,
            }) => assert!(smallest_singular_value < 1e-8),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn align_is_nearest_among_sampled_unitaries() {
        let m = M::from_rows(&[
            vec![c(1.2, 0.3), c(-0.4, 0.1)],
            vec![c(0.2, -0.5), c(0.9, 0.6)],
        ]);
        let u = unitary_align(&m, 1e-8).unwrap();
        assert!(u.unitarity_deviation() < 1e-12);
        let best = m.distance(&u);
        let mut seed = [0.1, 0.7, -0.3, 0.2, 0.5, -0.9, 0.4, 0.8];
        for trial in 0..200 {
            for (k, s) in seed.iter_mut().enumerate() {
                *s = ((*s * 37.0 + k as f64 + trial as f64 * 0.13).sin() * 1.7).fract();
            }
            let w = random_unitary(2, &seed);
            assert!(m.distance(&w) >= best - 1e-12);
        }
    }

    #[test]
    fn align_det_phase_is_continuous() {
        let m = M::from_rows(&[
            vec![c(1.0, 0.2), c(0.3, -0.1)],
            vec![c(-0.2, 0.4), c(0.8, 0.1)],
        ]);
        let u0 = unitary_align(&m, 1e-8).unwrap();
        let dm = M::from_fn(2, 2, |i, j| c(1e-7 * (i + 1) as f64, -1e-7 * j as f64));
        let u1 = unitary_align(&(&m + &dm), 1e-8).unwrap();
        let phase0 = det(&u0).unwrap().arg();
        let phase1 = det(&u1).unwrap().arg();
        assert!((phase0 - phase1).abs() < 1e-6);
    }

    #[test]
    fn single_precision_eig() {
        let h = &pauli::<f32>(1) + &pauli::<f32>(3).scale_real(3.0);
        let e = eig_hermitian(&h, f32::DEFAULT_TOL).unwrap();
        assert!((e.values[1] - 10f32.sqrt()).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn hermitian_reconstruction(n in 2usize..=8, entries in prop::collection::vec(-2.0f64..2.0, 80)) {
            let h = random_hermitian(n, &entries);
            let e = eig_hermitian(&h, 1e-10).unwrap();
            prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let scale = h.fro_norm().max(1e-300);
            prop_assert!(e.reconstruct().distance(&h) < 1e-10 * scale);
            prop_assert!(e.vectors.unitarity_deviation() < 1e-10);
        }

        #[test]
        fn spectrum_is_unitarily_invariant(
            n in 2usize..=6,
            entries in prop::collection::vec(-2.0f64..2.0, 60),
            u_entries in prop::collection::vec(-1.0f64..1.0, 72),
        ) {
            let h = random_hermitian(n, &entries);
            let u = random_unitary(n, &u_entries);
            let rotated = &(&u.adjoint() * &h) * &u;
            let rotated = M::from_fn(n, n, |i, j| (rotated[(i, j)] + rotated[(j, i)].conj()) * 0.5);
            let a = eig_hermitian(&h, 1e-10).unwrap().values;
            let b = eig_hermitian(&rotated, 1e-10).unwrap().values;
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn polar_factor_is_unitary(n in 1usize..=5, entries in prop::collection::vec(-1.0f64..1.0, 50)) {
            let mut it = entries.iter().copied().cycle();
            let m = M::from_fn(n, n, |i, j| {
                let z = c(it.next().unwrap(), it.next().unwrap());
                if i == j { z + c(3.0, 0.0) } else { z }
            });
            let u = unitary_align(&m, 1e-8).unwrap();
            prop_assert!(u.unitarity_deviation() < 1e-12);
        }
    }
}
