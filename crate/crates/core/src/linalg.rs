//! Dense complex matrices and the Hermitian eigensolver.
//!
//! Matrices here are small (L = m * N_S is at most a few hundred), so a
//! row-major `Vec` with a cyclic Jacobi eigensolver is both fast enough and
//! accurate: Jacobi delivers eigenvectors that are orthonormal to working
//! precision even inside clusters of (numerically) repeated eigenvalues,
//! which the subspace comparisons in [`crate::approx`] rely on.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Row-major construction; panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_columns(columns: &[Vec<C64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols, |r, c| columns[c][r])
    }

    /// `x x^H`.
    pub fn outer(x: &[C64]) -> Self {
        Self::from_fn(x.len(), x.len(), |r, c| x[r] * x[c].conj())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> Self {
        Self::from_fn(self.rows, end - start, |r, c| self[(r, start + c)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "mat_vec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x^H A x`.
    pub fn quad_form(&self, x: &[C64]) -> C64 {
        let ax = self.mat_vec(x);
        x.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum()
    }

    /// Entrywise (Hadamard / Schur) product.
    pub fn hadamard(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v.norm_sqr()).sum())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `max |A - A^H|` over all entries.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Replace `A` by `(A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for r in 0..n {
            let d = self[(r, r)].re;
            self[(r, r)] = C64::new(d, 0.0);
            for c in r + 1..n {
                let avg = (self[(r, c)] + self[(c, r)].conj()) * 0.5;
                self[(r, c)] = avg;
                self[(c, r)] = avg.conj();
            }
        }
    }

    /// Solve `A x = b` for Hermitian positive definite `A` by Cholesky.
    pub fn cholesky_solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let chol = Cholesky::new(self)?;
        Ok(chol.solve(b))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower-triangular Cholesky factor `A = G G^H`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    g: CMatrix,
}

impl Cholesky {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut g = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= g[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(Error::SingularMatrix);
            }
            let djj = libm::sqrt(d);
            g[(j, j)] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= g[(i, k)] * g[(j, k)].conj();
                }
                g[(i, j)] = s / djj;
            }
        }
        Ok(Self { g })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.g.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let s = (0..i).fold(y[i], |s, k| s - self.g[(i, k)] * y[k]);
            y[i] = s / self.g[(i, i)];
        }
        for i in (0..n).rev() {
            let s = (i + 1..n).fold(y[i], |s, k| s - self.g[(k, i)].conj() * y[k]);
            y[i] = s / self.g[(i, i)];
        }
        y
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending
/// and eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 60;

impl HermitianEigen {
    /// Cyclic complex Jacobi. The input is symmetrized first, so tiny
    /// rounding asymmetries are tolerated.
    pub fn new(matrix: &CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        let n = matrix.rows();
        let mut a = matrix.clone();
        a.symmetrize();
        let mut v = CMatrix::identity(n);

        let floor = f64::EPSILON * f64::EPSILON * a.frobenius_norm();
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let mag = a[(p, q)].norm();
                    let scale = libm::sqrt(a[(p, p)].re.abs() * a[(q, q)].re.abs());
                    if mag > floor && mag > f64::EPSILON * scale {
                        rotate(&mut a, &mut v, p, q);
                        rotated = true;
                    }
                }
            }
            if !rotated {
                break;
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.vectors.column(i)
    }

    /// `sum_i lambda_i u_i u_i^H` restricted to columns `start..end`.
    pub fn partial_reconstruction(&self, start: usize, end: usize) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for i in start..end {
            let lam = self.values[i];
            for r in 0..n {
                let ur = self.vectors[(r, i)] * lam;
                for c in 0..n {
                    out[(r, c)] += ur * self.vectors[(c, i)].conj();
                }
            }
        }
        out
    }
}

/// One Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // phase that makes the pivot real
    let phase = apq / mag;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + libm::sqrt(1.0 + tau * tau))
    } else {
        -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
    };
    let c = 1.0 / libm::sqrt(1.0 + t * t);
    let s = t * c;
    // column p <- c*col_p - s*conj(phase)*col_q ; column q <- s*col_p + c*conj(phase)*col_q
    let w = phase.conj();
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * w * s;
        a[(k, q)] = akp * s + akq * w * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * w * s;
        v[(k, q)] = vkp * s + vkq * w * c;
    }
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns and equal column count.
pub fn max_principal_angle(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.rows(),
        });
    }
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            found: b.cols(),
        });
    }
    if a.cols() == 0 {
        return Ok(0.0);
    }
    // residual of B after projecting onto span(A): its spectral norm is sin(theta_max)
    let proj = a.matmul(&a.adjoint().matmul(b));
    let resid = b.sub(&proj);
    let gram = resid.adjoint().matmul(&resid);
    let eig = HermitianEigen::new(&gram)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    Ok(libm::asin(libm::sqrt(top).min(1.0)))
}

/// Inner product `x^H y`.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    libm::sqrt(x.iter().map(|v| v.norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::cis;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let x = CMatrix::from_fn(n, n, |_, _| C64::new(lcg(&mut s), lcg(&mut s)));
        let mut h = x.add(&x.adjoint());
        h.symmetrize();
        h
    }

    #[test]
    fn identity_spectrum() {
        let eig = HermitianEigen::new(&CMatrix::identity(5)).unwrap();
        assert!(eig.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn diagonal_sorted_descending() {
        let mut m = CMatrix::zeros(4, 4);
        for (i, v) in [1.0, 4.0, 1.0, 2.0].iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        let eig = HermitianEigen::new(&m).unwrap();
        assert_eq!(eig.values, alloc::vec![4.0, 2.0, 1.0, 1.0]);
        assert!((eig.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_hermitian_reconstructs_and_is_unitary() {
        for seed in 0..5 {
            let h = random_hermitian(12, seed);
            let eig = HermitianEigen::new(&h).unwrap();
            let rec = eig.partial_reconstruction(0, 12);
            assert!(rec.sub(&h).frobenius_norm() / h.frobenius_norm() < 1e-13);
            let gram = eig.vectors.adjoint().matmul(&eig.vectors);
            assert!(gram.sub(&CMatrix::identity(12)).frobenius_norm() < 1e-13);
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let x: Vec<C64> = (0..6).map(|k| cis(0.3 * k as f64)).collect();
        let eig = HermitianEigen::new(&CMatrix::outer(&x)).unwrap();
        assert!((eig.values[0] - 6.0).abs() < 1e-13);
        assert!(eig.values[1..].iter().all(|v| v.abs() < 1e-13));
        let u = eig.vector(0);
        assert!((dot(&u, &x).norm() - libm::sqrt(6.0)).abs() < 1e-12);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let h = random_hermitian(8, 7);
        let spd = h.matmul(&h.adjoint()).add(&CMatrix::identity(8));
        let b: Vec<C64> = (0..8).map(|k| C64::new(k as f64, 1.0)).collect();
        let x = spd.cholesky_solve(&b).unwrap();
        let back = spd.mat_vec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).norm() < 1e-10);
        }
        assert_eq!(
            CMatrix::zeros(3, 3).cholesky_solve(&[C64::new(1.0, 0.0); 3]),
            Err(Error::SingularMatrix)
        );
    }

    #[test]
    fn principal_angle_of_rotated_basis() {
        let h = random_hermitian(6, 3);
        let eig = HermitianEigen::new(&h).unwrap();
        let a = eig.vectors.column_block(0, 2);
        // same span, different basis
        let mix = CMatrix::from_row_major(
            2,
            2,
            alloc::vec![
                cis(0.2) * 0.6,
                cis(1.0) * 0.8,
                cis(0.5) * -0.8,
                cis(1.3) * 0.6
            ],
        );
        let b = a.matmul(&mix);
        assert!(max_principal_angle(&a, &b).unwrap() < 1e-7);
        let c = eig.vectors.column_block(2, 4);
        assert!((max_principal_angle(&a, &c).unwrap() - core::f64::consts::FRAC_PI_2).abs() < 1e-7);
    }
}
