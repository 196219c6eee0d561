//! Stacked observations, the sample spatial-temporal covariance, its
//! signal/noise eigen-split and MDL order selection.
//!
//! Stacked vectors are sensor-major: entry `i * m + j` is sensor `i` at the
//! `j`-th sample of the window (oldest first), matching the delay vector of
//! [`crate::geometry::StackedModel`].
//!
//! The covariance is accumulated in fixed chunks of [`CHUNK_VECTORS`] stacked
//! vectors and the partial sums are combined by a fixed pairwise tree, so a
//! parallel caller that computes [`partial_sum`] per chunk and hands the
//! results to [`reduce_partials`] gets bit-identical output to
//! [`estimate_stcm`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianEigen};
use crate::C64;

/// Stacked vectors per accumulation chunk.
pub const CHUNK_VECTORS: usize = 1024;

/// Relative floor applied to eigenvalues before taking logs in MDL.
pub const MDL_EIGEN_FLOOR: f64 = 1e-15;

/// Array snapshots, `N_S x M`, one row per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: CMatrix,
    fs: f64,
}

impl SnapshotMatrix {
    pub fn new(data: CMatrix, fs: f64) -> Result<Self> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if data.rows() == 0 {
            return Err(Error::EmptyInput("snapshot matrix has no sensors"));
        }
        Ok(Self { data, fs })
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn n_sensors(&self) -> usize {
        self.data.rows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.cols()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Every sample multiplied by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        let data = CMatrix::from_fn(self.data.rows(), self.data.cols(), |r, t| {
            self.data[(r, t)] * c
        });
        Self { data, fs: self.fs }
    }
}

fn check_order(snap: &SnapshotMatrix, m: usize) -> Result<usize> {
    if m < 1 {
        return Err(Error::InvalidParameter(
            "temporal lag order m must be at least 1".into(),
        ));
    }
    let total = snap.n_snapshots();
    if total < m {
        return Err(Error::NotEnoughSnapshots {
            snapshots: total,
            lag_order: m,
        });
    }
    Ok(total - m + 1)
}

/// Number of stacked vectors, `M - m + 1`.
pub fn stacked_count(snap: &SnapshotMatrix, m: usize) -> Result<usize> {
    check_order(snap, m)
}

/// Writes the stacked vector whose window starts at sample `start`.
pub fn stacked_vector_into(snap: &SnapshotMatrix, m: usize, start: usize, out: &mut [C64]) {
    for i in 0..snap.n_sensors() {
        out[i * m..(i + 1) * m].copy_from_slice(&snap.data.row(i)[start..start + m]);
    }
}

/// All `M - m + 1` stacked vectors of length `m * N_S`.
pub fn stack_observations(snap: &SnapshotMatrix, m: usize) -> Result<Vec<Vec<C64>>> {
    let count = check_order(snap, m)?;
    let l = m * snap.n_sensors();
    Ok((0..count)
        .map(|t| {
            let mut v = vec![C64::new(0.0, 0.0); l];
            stacked_vector_into(snap, m, t, &mut v);
            v
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StcmEstimate {
    matrix: CMatrix,
    n_vectors: usize,
    m: usize,
    n_sensors: usize,
    fs: f64,
}

impl StcmEstimate {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn n_vectors(&self) -> usize {
        self.n_vectors
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn eigen(&self) -> Result<HermitianEigen> {
        HermitianEigen::new(&self.matrix)
    }
}

/// Number of accumulation chunks for `M - m + 1` stacked vectors.
pub fn chunk_count(snap: &SnapshotMatrix, m: usize) -> Result<usize> {
    Ok(check_order(snap, m)?.div_ceil(CHUNK_VECTORS))
}

/// Upper-triangular sum of `y y^H` over the stacked vectors of chunk `chunk`,
/// stored row-major in an `L x L` buffer.
pub fn partial_sum(snap: &SnapshotMatrix, m: usize, chunk: usize) -> Result<Vec<C64>> {
    let count = check_order(snap, m)?;
    let l = m * snap.n_sensors();
    let start = chunk * CHUNK_VECTORS;
    let end = (start + CHUNK_VECTORS).min(count);
    let mut acc = vec![C64::new(0.0, 0.0); l * l];
    let mut y = vec![C64::new(0.0, 0.0); l];
    for t in start..end {
        stacked_vector_into(snap, m, t, &mut y);
        for r in 0..l {
            let yr = y[r];
            let row = &mut acc[r * l..(r + 1) * l];
            for c in r..l {
                row[c] += yr * y[c].conj();
            }
        }
    }
    Ok(acc)
}

/// Pairwise tree reduction in a fixed order: level by level, element `2i`
/// absorbs element `2i + 1`.
pub fn reduce_partials(mut parts: Vec<Vec<C64>>) -> Vec<C64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut iter = parts.into_iter();
        while let Some(mut a) = iter.next() {
            if let Some(b) = iter.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Normalizes a reduced upper-triangular sum into the Hermitian estimate.
pub fn finish_stcm(snap: &SnapshotMatrix, m: usize, upper: Vec<C64>) -> Result<StcmEstimate> {
    let n_vectors = check_order(snap, m)?;
    let l = m * snap.n_sensors();
    if upper.len() != l * l {
        return Err(Error::DimensionMismatch {
            expected: l * l,
            found: upper.len(),
        });
    }
    let scale = 1.0 / n_vectors as f64;
    let mut matrix = CMatrix::from_row_major(l, l, upper);
    for r in 0..l {
        matrix[(r, r)] = C64::new(matrix[(r, r)].re * scale, 0.0);
        for c in r + 1..l {
            let v = matrix[(r, c)] * scale;
            matrix[(r, c)] = v;
            matrix[(c, r)] = v.conj();
        }
    }
    Ok(StcmEstimate {
        matrix,
        n_vectors,
        m,
        n_sensors: snap.n_sensors(),
        fs: snap.fs,
    })
}

/// `S = (1 / (M - m + 1)) sum_t y(t) y(t)^H`.
pub fn estimate_stcm(snap: &SnapshotMatrix, m: usize) -> Result<StcmEstimate> {
    let chunks = chunk_count(snap, m)?;
    let parts = (0..chunks)
        .map(|c| partial_sum(snap, m, c))
        .collect::<Result<Vec<_>>>()?;
    finish_stcm(snap, m, reduce_partials(parts))
}

/// Eigenvalues (descending) and eigenvectors split after the first `p`.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    eigenvalues: Vec<f64>,
    vectors: CMatrix,
    p: usize,
}

impl SubspaceSplit {
    /// Requires `1 <= p <= L - 1`.
    pub fn from_eigen(eig: HermitianEigen, p: usize) -> Result<Self> {
        let l = eig.values.len();
        check_split_order(p, l)?;
        Ok(Self {
            eigenvalues: eig.values,
            vectors: eig.vectors,
            p,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// `U_s`, `L x P`.
    pub fn signal(&self) -> CMatrix {
        self.vectors.column_block(0, self.p)
    }

    /// `U_n`, `L x (L - P)`.
    pub fn noise(&self) -> CMatrix {
        self.vectors.column_block(self.p, self.dim())
    }

    /// `U_n U_n^H`.
    pub fn noise_projector(&self) -> CMatrix {
        projector(&self.noise())
    }
}

/// `U U^H` for a basis stored in columns.
pub fn projector(u: &CMatrix) -> CMatrix {
    let l = u.rows();
    let k = u.cols();
    let mut out = CMatrix::zeros(l, l);
    for r in 0..l {
        for c in r..l {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..k {
                acc += u[(r, j)] * u[(c, j)].conj();
            }
            out[(r, c)] = acc;
            out[(c, r)] = acc.conj();
        }
        out[(r, r)].im = 0.0;
    }
    out
}

pub fn check_split_order(p: usize, l: usize) -> Result<()> {
    if l < 2 || p < 1 || p > l - 1 {
        return Err(Error::OrderOutOfRange {
            p,
            min: 1,
            max: l.saturating_sub(1),
        });
    }
    Ok(())
}

/// Eigen-decomposes `S` and splits after the `p` largest eigenvalues.
pub fn eigen_split(s: &StcmEstimate, p: usize) -> Result<SubspaceSplit> {
    check_split_order(p, s.dim())?;
    SubspaceSplit::from_eigen(s.eigen()?, p)
}

/// `MDL(k)` for `k = 0..L-1` (Wax-Kailath form).
pub fn mdl_values(eigenvalues: &[f64], n_vectors: usize) -> Result<Vec<f64>> {
    if eigenvalues.is_empty() {
        return Err(Error::EmptyInput("eigenvalues"));
    }
    if n_vectors < 1 {
        return Err(Error::InvalidParameter(
            "MDL needs at least one observation".into(),
        ));
    }
    let l = eigenvalues.len();
    let top = eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = if top > 0.0 {
        MDL_EIGEN_FLOOR * top
    } else {
        f64::MIN_POSITIVE
    };
    let lam: Vec<f64> = eigenvalues.iter().map(|&v| v.max(floor)).collect();
    let n = n_vectors as f64;
    let log_n = libm::log(n);
    Ok((0..l)
        .map(|k| {
            let tail = &lam[k..];
            let count = tail.len() as f64;
            let mean_log = tail.iter().map(|v| libm::log(*v)).sum::<f64>() / count;
            let arith = tail.iter().sum::<f64>() / count;
            let ratio_log = (mean_log - libm::log(arith)).min(0.0);
            let kf = k as f64;
            -count * n * ratio_log + 0.5 * kf * (2.0 * l as f64 - kf) * log_n
        })
        .collect())
}

/// `argmin_k MDL(k)`, lowest `k` on ties.
pub fn mdl_order(eigenvalues: &[f64], n_vectors: usize) -> Result<usize> {
    let values = mdl_values(eigenvalues, n_vectors)?;
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_stacked_model, ArrayGeometry};
    use crate::linalg::{dot, max_principal_angle};

    fn snapshot(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> SnapshotMatrix {
        SnapshotMatrix::new(CMatrix::from_fn(rows, cols, f), 1000.0).unwrap()
    }

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> SnapshotMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        snapshot(rows, cols, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn stacking_counts_and_layout() {
        let s = snapshot(2, 3, |r, t| C64::new((10 * r + t) as f64, 0.0));
        let v = stack_observations(&s, 2).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(
            v[1].iter().map(|z| z.re).collect::<Vec<_>>(),
            alloc::vec![1.0, 2.0, 11.0, 12.0]
        );
        let raw = stack_observations(&s, 1).unwrap();
        assert_eq!(raw.len(), 3);
        assert_eq!(raw[2][1], C64::new(12.0, 0.0));
        let single = snapshot(1, 5, |_, t| C64::new(t as f64, 0.0));
        let whole = stack_observations(&single, 5).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0], single.data().row(0).to_vec());
        assert!(matches!(
            stack_observations(&s, 4),
            Err(Error::NotEnoughSnapshots { .. })
        ));
    }

    #[test]
    fn zero_input_gives_zero_matrix() {
        let s = snapshot(3, 50, |_, _| C64::new(0.0, 0.0));
        let est = estimate_stcm(&s, 4).unwrap();
        assert_eq!(est.matrix().frobenius_norm(), 0.0);
        assert_eq!(est.n_vectors(), 47);
    }

    #[test]
    fn chunked_sum_matches_direct_mean() {
        let s = lcg_matrix(2, 2500, 7);
        let m = 3;
        let est = estimate_stcm(&s, m).unwrap();
        let vecs = stack_observations(&s, m).unwrap();
        let l = 6;
        let mut direct = CMatrix::zeros(l, l);
        for v in &vecs {
            direct = direct.add(&CMatrix::outer(v));
        }
        direct.scale(1.0 / vecs.len() as f64);
        assert!(est.matrix().sub(&direct).frobenius_norm() < 1e-12 * direct.frobenius_norm());
        assert_eq!(est.matrix().hermitian_defect(), 0.0);
        assert!(chunk_count(&s, m).unwrap() >= 3);
    }

    #[test]
    fn single_tone_is_rank_one_along_g() {
        let geom = ArrayGeometry::ula(3, 0.1, 1500.0).unwrap();
        let theta = 0.6;
        let fs = 10_000.0;
        let f0 = 2300.0;
        let tau = crate::geometry::sensor_delays(&geom, theta, 0.0);
        let s = SnapshotMatrix::new(
            CMatrix::from_fn(3, 4000, |i, t| {
                crate::math::cis(2.0 * core::f64::consts::PI * f0 * (t as f64 / fs - tau[i]))
            }),
            fs,
        )
        .unwrap();
        let m = 4;
        let est = estimate_stcm(&s, m).unwrap();
        let eig = est.eigen().unwrap();
        assert!(eig.values[1] < 1e-9 * eig.values[0]);
        let g = build_stacked_model(&geom, theta, 0.0, m, 1.0 / fs)
            .unwrap()
            .g_vector(f0);
        let a = CMatrix::from_columns(&[eig.vector(0)]);
        let b = CMatrix::from_columns(&[g.iter().map(|v| v / libm::sqrt(12.0)).collect()]);
        assert!(max_principal_angle(&a, &b).unwrap() < deg(1.0));
    }

    fn deg(x: f64) -> f64 {
        crate::math::deg_to_rad(x)
    }

    #[test]
    fn split_examples() {
        let est = StcmEstimate {
            matrix: CMatrix::identity(4),
            n_vectors: 10,
            m: 1,
            n_sensors: 4,
            fs: 1.0,
        };
        let sp = eigen_split(&est, 2).unwrap();
        assert!(sp.eigenvalues().iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(matches!(
            eigen_split(&est, 0),
            Err(Error::OrderOutOfRange { min: 1, max: 3, .. })
        ));
        assert!(eigen_split(&est, 4).is_err());

        let mut d = CMatrix::identity(4);
        d[(0, 0)] = C64::new(4.0, 0.0);
        let est = StcmEstimate { matrix: d, ..est };
        let sp = eigen_split(&est, 1).unwrap();
        let us = sp.signal().column(0);
        assert!((us[0].norm() - 1.0).abs() < 1e-14);
        let un = sp.noise();
        assert_eq!(un.cols(), 3);
        for c in 0..3 {
            assert!(dot(&us, &un.column(c)).norm() < 1e-14);
        }
    }

    #[test]
    fn mdl_examples() {
        assert_eq!(mdl_order(&[1.0; 8], 100).unwrap(), 0);
        let mut lam = alloc::vec![1.0; 16];
        lam[0] = 100.0;
        lam[1] = 100.0;
        assert_eq!(mdl_order(&lam, 4096).unwrap(), 2);
        // noiseless: exact zeros are clamped, count tracks the nonzero ones
        let lam = [5.0, 3.0, 1.0, 0.0, 0.0, -1e-18];
        assert_eq!(mdl_order(&lam, 1000).unwrap(), 3);
        assert!(mdl_order(&[], 10).is_err());
    }
}
