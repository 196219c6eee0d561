//! Closed-form and quadrature approximation of the single-source
//! spatial-temporal covariance, its modal basis and derived quantities.
//!
//! For a source at `theta` with PSD `S(f)` the covariance entries are samples
//! of the source autocorrelation at the stacked delay differences,
//! `s_kl = r_x(h_k - h_l)`. With a flat PSD over `[fc - B/2, fc + B/2]` this is
//!
//! ```text
//! s_kl = sinc(B (h_k - h_l)) * exp(j 2 pi fc (h_k - h_l))
//! ```
//!
//! normalized to a unit diagonal. The matrix factors as a Hadamard product of
//! the rank-one narrowband part `g g^H` and the real sinc kernel, so both
//! share eigenvalues and the eigenvectors differ by the entrywise factor `g`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{build_stacked_model, ArrayGeometry, StackedModel};
use crate::linalg::{max_principal_angle, CMatrix, HermitianEigen};
use crate::math::{cis, deg_to_rad, sinc};
use crate::psd::PsdShape;
use crate::C64;

/// Default relative threshold for numerical rank (`sigma_i > tol * sigma_1`).
pub const DEFAULT_RANK_TOL: f64 = 1e-3;

/// Eigenvalues closer than this (relative to `sigma_1`) form one cluster.
pub const CLUSTER_GAP: f64 = 1e-8;

/// Trapezoid quadrature with Richardson extrapolation over node doublings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    /// Stop once successive extrapolated entries change by less than this.
    pub tolerance: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            initial_nodes: 2048,
            max_nodes: 1 << 16,
            tolerance: 1e-9,
        }
    }
}

impl Quadrature {
    /// Exactly `nodes` intervals, extrapolated against `nodes / 2`.
    pub fn fixed(nodes: usize) -> Self {
        Self {
            initial_nodes: (nodes / 2).max(1),
            max_nodes: nodes.max(2),
            tolerance: 0.0,
        }
    }
}

/// What the approximation assumes about the source spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumAssumption {
    Uniform {
        fc: f64,
        bandwidth: f64,
    },
    Psd {
        shape: PsdShape,
        quadrature: Quadrature,
    },
}

impl SpectrumAssumption {
    /// Reference frequency used for the narrowband factor.
    pub fn center(&self) -> f64 {
        match self {
            SpectrumAssumption::Uniform { fc, .. } => *fc,
            SpectrumAssumption::Psd { shape, .. } => shape.band_center_width().0,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        match self {
            SpectrumAssumption::Uniform { bandwidth, .. } => *bandwidth,
            SpectrumAssumption::Psd { shape, .. } => shape.band_center_width().1,
        }
    }
}

/// Normalized approximate covariance `S̆` with its Hadamard factors.
#[derive(Debug, Clone)]
pub struct ApproxStcm {
    matrix: CMatrix,
    narrow: CMatrix,
    wide: CMatrix,
    model: StackedModel,
    fc: f64,
    bandwidth: f64,
}

impl ApproxStcm {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `g g^H` at the reference frequency.
    pub fn narrow(&self) -> &CMatrix {
        &self.narrow
    }

    /// Baseband kernel; the real sinc matrix in the uniform case.
    pub fn wide(&self) -> &CMatrix {
        &self.wide
    }

    pub fn model(&self) -> &StackedModel {
        &self.model
    }

    pub fn center_frequency(&self) -> f64 {
        self.fc
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `g(fc, theta)`.
    pub fn g(&self) -> Vec<C64> {
        self.model.g_vector(self.fc)
    }

    /// Adds `delta` to `S̆` alone, leaving the factors untouched. Exists to
    /// exercise the failure paths of the self-checks.
    pub fn perturbed(&self, delta: &CMatrix) -> Result<Self> {
        if delta.rows() != self.dim() || delta.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: delta.rows(),
            });
        }
        let mut out = self.clone();
        out.matrix = out.matrix.add(delta);
        Ok(out)
    }
}

/// Closed-form `S̆` for a flat PSD of width `bandwidth` centred at `fc`.
/// `bandwidth = 0` gives the narrowband matrix `g g^H`.
pub fn approx_stcm_uniform(
    geometry: &ArrayGeometry,
    theta: f64,
    phi: f64,
    fc: f64,
    bandwidth: f64,
    m: usize,
    dt: f64,
) -> Result<ApproxStcm> {
    if !(bandwidth >= 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be nonnegative, got {bandwidth}"
        )));
    }
    let model = build_stacked_model(geometry, theta, phi, m, dt)?;
    Ok(uniform_from_model(model, fc, bandwidth))
}

fn uniform_from_model(model: StackedModel, fc: f64, bandwidth: f64) -> ApproxStcm {
    let h = model.h();
    let l = h.len();
    let g = model.g_vector(fc);
    let narrow = CMatrix::outer(&g);
    let wide = CMatrix::from_fn(l, l, |r, c| C64::new(sinc(bandwidth * (h[r] - h[c])), 0.0));
    // entry-by-entry product keeps the diagonal exactly one
    let matrix = CMatrix::from_fn(l, l, |r, c| {
        let d = h[r] - h[c];
        cis(2.0 * PI * fc * d) * sinc(bandwidth * d)
    });
    ApproxStcm {
        matrix,
        narrow,
        wide,
        model,
        fc,
        bandwidth,
    }
}

/// `S̆` from an arbitrary PSD by numerical integration of
/// `int S(f) exp(j 2 pi (h_k - h_l) f) df`, normalized so the trace is `L`.
pub fn approx_stcm_psd(
    geometry: &ArrayGeometry,
    theta: f64,
    phi: f64,
    psd: &PsdShape,
    m: usize,
    dt: f64,
    quadrature: &Quadrature,
) -> Result<ApproxStcm> {
    psd.validate()?;
    let model = build_stacked_model(geometry, theta, phi, m, dt)?;
    if let Some(f0) = psd.line_frequency() {
        return Ok(uniform_from_model(model, f0, 0.0));
    }
    let (fc, bandwidth) = psd.band_center_width();
    let h = model.h();
    let l = h.len();

    // entries depend only on |h_k - h_l|; integrate each distinct lag once
    let mut lag_index: BTreeMap<i64, usize> = BTreeMap::new();
    let mut lags: Vec<f64> = vec![0.0];
    lag_index.insert(0, 0);
    let mut slot = vec![0usize; l * l];
    for r in 0..l {
        for c in r + 1..l {
            let d = (h[r] - h[c]).abs();
            let key = libm::round(d * 1e15) as i64;
            let idx = *lag_index.entry(key).or_insert_with(|| {
                lags.push(d);
                lags.len() - 1
            });
            slot[r * l + c] = idx;
        }
    }
    let values = integrate_lags(psd, &lags, quadrature)?;
    let total = values[0].re;
    if !(total > 0.0) {
        return Err(Error::InvalidParameter(
            "PSD integrates to zero power".into(),
        ));
    }

    let mut matrix = CMatrix::identity(l);
    for r in 0..l {
        for c in r + 1..l {
            let v = values[slot[r * l + c]] / total;
            // the lag was stored as |h_r - h_c|
            let v = if h[r] - h[c] >= 0.0 { v } else { v.conj() };
            matrix[(r, c)] = v;
            matrix[(c, r)] = v.conj();
        }
    }
    let g = model.g_vector(fc);
    let narrow = CMatrix::outer(&g);
    let wide = CMatrix::from_fn(l, l, |r, c| matrix[(r, c)] * narrow[(r, c)].conj());
    Ok(ApproxStcm {
        matrix,
        narrow,
        wide,
        model,
        fc,
        bandwidth,
    })
}

/// `int S(f) exp(j 2 pi tau f) df` over the PSD support for every lag `tau`.
fn integrate_lags(psd: &PsdShape, lags: &[f64], quad: &Quadrature) -> Result<Vec<C64>> {
    let (lo, hi) = psd.support();
    let width = hi - lo;
    let mut n = quad.initial_nodes.max(1);
    let step = width / n as f64;

    let mut dens = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let f = lo + i as f64 * step;
        let d = psd.density(f);
        if d < 0.0 {
            return Err(Error::NegativeDensity {
                frequency: f,
                density: d,
            });
        }
        dens.push(d);
    }
    // trapezoid sums (without the step factor) per lag
    let mut sums: Vec<C64> = lags
        .iter()
        .map(|&tau| {
            let mut acc = C64::new(0.0, 0.0);
            accumulate(&mut acc, tau, lo, step, &dens, 1, 0);
            acc - (cis(2.0 * PI * tau * lo) * dens[0] + cis(2.0 * PI * tau * hi) * dens[n]) * 0.5
        })
        .collect();
    let mut trap: Vec<C64> = sums.iter().map(|s| s * step).collect();
    let mut extrap: Option<Vec<C64>> = None;

    while n * 2 <= quad.max_nodes {
        let h_new = width / (2 * n) as f64;
        let mids: Vec<f64> = (0..n)
            .map(|i| psd.density(lo + (2 * i + 1) as f64 * h_new))
            .collect();
        if let Some(&bad) = mids.iter().find(|d| **d < 0.0) {
            return Err(Error::NegativeDensity {
                frequency: f64::NAN,
                density: bad,
            });
        }
        for (s, &tau) in sums.iter_mut().zip(lags) {
            let mut acc = C64::new(0.0, 0.0);
            accumulate(&mut acc, tau, lo + h_new, 2.0 * h_new, &mids, 1, 0);
            *s += acc;
        }
        n *= 2;
        let next: Vec<C64> = sums.iter().map(|s| s * h_new).collect();
        let rich: Vec<C64> = next
            .iter()
            .zip(&trap)
            .map(|(t2, t1)| t2 + (t2 - t1) / 3.0)
            .collect();
        let done = match &extrap {
            Some(prev) => {
                let scale = rich[0].norm().max(f64::MIN_POSITIVE);
                let delta = rich
                    .iter()
                    .zip(prev)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                delta / scale < quad.tolerance
            }
            None => false,
        };
        trap = next;
        extrap = Some(rich);
        if done {
            break;
        }
    }
    Ok(extrap.unwrap_or(trap))
}

/// Adds `sum_i w_i exp(j 2 pi tau (start + i step))` using a phase
/// recurrence that is resynchronized every 64 nodes.
fn accumulate(
    acc: &mut C64,
    tau: f64,
    start: f64,
    step: f64,
    weights: &[f64],
    _stride: usize,
    _offset: usize,
) {
    let rot = cis(2.0 * PI * tau * step);
    let mut ph = C64::new(0.0, 0.0);
    for (i, &w) in weights.iter().enumerate() {
        if i % 64 == 0 {
            ph = cis(2.0 * PI * tau * (start + i as f64 * step));
        }
        *acc += ph * w;
        ph *= rot;
    }
}

/// Eigen-decomposition of `S̆`: `sigma` descending and clamped at zero,
/// eigenvectors with their largest-magnitude entry made real positive.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub sigma: Vec<f64>,
    pub vectors: CMatrix,
    /// Smallest eigenvalue before clamping.
    pub min_raw_eigenvalue: f64,
}

impl ModalBasis {
    /// Generalized steering vector, the dominant eigenvector.
    pub fn gsv(&self) -> Vec<C64> {
        self.vectors.column(0)
    }

    pub fn vector(&self, i: usize) -> Vec<C64> {
        self.vectors.column(i)
    }

    pub fn rank(&self, rank_tol: f64) -> usize {
        numerical_rank(&self.sigma, rank_tol)
    }
}

pub fn modal_basis(s: &ApproxStcm) -> Result<ModalBasis> {
    basis_of(&s.matrix)
}

fn basis_of(matrix: &CMatrix) -> Result<ModalBasis> {
    let eig = HermitianEigen::new(matrix)?;
    let min_raw_eigenvalue = eig.values.last().copied().unwrap_or(0.0);
    let sigma = eig.values.iter().map(|v| v.max(0.0)).collect();
    let mut vectors = eig.vectors;
    canonicalize_phases(&mut vectors);
    Ok(ModalBasis {
        sigma,
        vectors,
        min_raw_eigenvalue,
    })
}

/// Rotate each column so its largest-magnitude entry (first on ties) is real
/// and positive.
pub fn canonicalize_phases(vectors: &mut CMatrix) {
    let (rows, cols) = (vectors.rows(), vectors.cols());
    for c in 0..cols {
        let mut best = 0;
        let mut best_mag = -1.0;
        for r in 0..rows {
            let mag = vectors[(r, c)].norm();
            if mag > best_mag * (1.0 + 1e-12) {
                best = r;
                best_mag = mag;
            }
        }
        if best_mag <= 0.0 {
            continue;
        }
        let rot = vectors[(best, c)].conj() / best_mag;
        for r in 0..rows {
            vectors[(r, c)] *= rot;
        }
        vectors[(best, c)] = C64::new(vectors[(best, c)].norm(), 0.0);
    }
}

/// Count of `sigma_i > rank_tol * sigma_1`.
pub fn numerical_rank(sigma: &[f64], rank_tol: f64) -> usize {
    let top = sigma.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rank_tol * top).count()
}

/// Index ranges of eigenvalue clusters: consecutive (descending) values
/// whose gap is below `rel_gap * sigma_1`.
pub fn eigen_clusters(sigma: &[f64], rel_gap: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if sigma.is_empty() {
        return out;
    }
    let scale = sigma
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut start = 0;
    for i in 1..sigma.len() {
        if (sigma[i - 1] - sigma[i]).abs() >= rel_gap * scale {
            out.push((start, i));
            start = i;
        }
    }
    out.push((start, sigma.len()));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCheck {
    pub start: usize,
    pub end: usize,
    /// Largest principal angle (radians) between `span{u_i}` and `span{g ∘ u^W_i}`.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    /// `max_i |sigma_i(S̆) - sigma_i(S̆^W)| / sigma_1`.
    pub eigenvalue_mismatch: f64,
    pub clusters: Vec<ClusterCheck>,
    pub eigenvalue_tol: f64,
    pub angle_tol: f64,
}

impl FactorizationReport {
    pub fn max_angle(&self) -> f64 {
        self.clusters.iter().map(|c| c.angle).fold(0.0, f64::max)
    }

    pub fn eigenvalues_match(&self) -> bool {
        self.eigenvalue_mismatch <= self.eigenvalue_tol
    }

    pub fn vectors_match(&self) -> bool {
        self.max_angle() < self.angle_tol
    }

    pub fn passed(&self) -> bool {
        self.eigenvalues_match() && self.vectors_match()
    }
}

/// Checks that `S̆` and its wideband factor share eigenvalues and that, per
/// eigenvalue cluster, the eigenvectors of `S̆` span the same subspace as
/// `g ∘ u^W`.
pub fn factorization_check(s: &ApproxStcm, basis: &ModalBasis) -> Result<FactorizationReport> {
    let wide = HermitianEigen::new(&s.wide)?;
    let top = basis
        .sigma
        .first()
        .copied()
        .unwrap_or(0.0)
        .max(f64::MIN_POSITIVE);
    let eigenvalue_mismatch = basis
        .sigma
        .iter()
        .zip(&wide.values)
        .map(|(a, b)| (a - b.max(0.0)).abs() / top)
        .fold(0.0, f64::max);

    let g = s.g();
    let l = g.len();
    let lifted = CMatrix::from_fn(l, l, |r, c| g[r] * wide.vectors[(r, c)]);
    let mut clusters = Vec::new();
    for (start, end) in eigen_clusters(&basis.sigma, CLUSTER_GAP) {
        let a = basis.vectors.column_block(start, end);
        let b = lifted.column_block(start, end);
        let angle = max_principal_angle(&a, &b)?;
        clusters.push(ClusterCheck { start, end, angle });
    }
    Ok(FactorizationReport {
        eigenvalue_mismatch,
        clusters,
        eigenvalue_tol: 1e-9,
        angle_tol: 1e-6,
    })
}

/// `(1/B) int_{-B/2}^{B/2} |sum_k x_k exp(-j 2 pi h_k u)|^2 du` by composite
/// Simpson with `panels` (even) intervals.
pub fn band_average_power(x: &[C64], h: &[f64], bandwidth: f64, panels: usize) -> f64 {
    let panels = panels.max(2) & !1;
    let step = bandwidth / panels as f64;
    let transform = |u: f64| -> f64 {
        x.iter()
            .zip(h)
            .map(|(xk, hk)| xk * cis(-2.0 * PI * hk * u))
            .sum::<C64>()
            .norm_sqr()
    };
    let mut acc = transform(-0.5 * bandwidth) + transform(0.5 * bandwidth);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * transform(-0.5 * bandwidth + i as f64 * step);
    }
    acc * step / 3.0 / bandwidth
}

/// Numerical rank of `sum_k S̆(theta_k)` (the effective signal-subspace
/// dimension estimate).
#[allow(clippy::too_many_arguments)]
pub fn effective_dim(
    geometry: &ArrayGeometry,
    thetas: &[f64],
    phi: f64,
    fc: f64,
    bandwidth: f64,
    m: usize,
    dt: f64,
    rank_tol: f64,
) -> Result<usize> {
    if thetas.is_empty() {
        return Err(Error::EmptyInput("source directions"));
    }
    let mut sum: Option<CMatrix> = None;
    for &theta in thetas {
        let s = approx_stcm_uniform(geometry, theta, phi, fc, bandwidth, m, dt)?;
        sum = Some(match sum {
            Some(acc) => acc.add(s.matrix()),
            None => s.matrix,
        });
    }
    let eig = HermitianEigen::new(&sum.expect("nonempty"))?;
    Ok(numerical_rank(&eig.values, rank_tol))
}

/// `K * rank(S̆(90°))`: the endfire direction carries the largest
/// time-bandwidth product.
pub fn effective_dim_max(
    geometry: &ArrayGeometry,
    sources: usize,
    fc: f64,
    bandwidth: f64,
    m: usize,
    dt: f64,
    rank_tol: f64,
) -> Result<usize> {
    if sources < 1 {
        return Err(Error::InvalidParameter(
            "at least one source is required".into(),
        ));
    }
    let s = approx_stcm_uniform(geometry, deg_to_rad(90.0), 0.0, fc, bandwidth, m, dt)?;
    Ok(sources * modal_basis(&s)?.rank(rank_tol))
}

/// Constant upper bound `K (m + N_S)` on the signal-subspace dimension.
pub fn bass_ale_bound(sources: usize, m: usize, n_sensors: usize) -> Result<usize> {
    if sources < 1 {
        return Err(Error::InvalidParameter(
            "at least one source is required".into(),
        ));
    }
    Ok(sources * (m + n_sensors))
}

/// The `m x m` block `sinc(|k - l| / nu)` that `S̆^W` approaches per sensor
/// as `B -> inf` with `fs = nu B`, and its descending spectrum.
pub fn asymptotic_sinf(m: usize, nu: f64) -> Result<(CMatrix, Vec<f64>)> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "nu must be positive, got {nu}"
        )));
    }
    let block = CMatrix::from_fn(m, m, |k, l| {
        C64::new(sinc((k as f64 - l as f64).abs() / nu), 0.0)
    });
    let eig = HermitianEigen::new(&block)?;
    Ok((block, eig.values))
}

/// `m B / fs`; the approximation assumes this is well above one.
pub fn decorrelation_ratio(m: usize, bandwidth: f64, fs: f64) -> f64 {
    m as f64 * bandwidth / fs
}

/// Precomputed `S̆`, spectrum and GSV for one grid direction.
#[derive(Debug, Clone)]
pub struct ModalEntry {
    pub theta_deg: f64,
    pub sbreve: CMatrix,
    pub sigma: Vec<f64>,
    pub gsv: Vec<C64>,
}

impl ModalEntry {
    pub fn compute(
        geometry: &ArrayGeometry,
        theta_deg: f64,
        phi: f64,
        assumption: &SpectrumAssumption,
        m: usize,
        dt: f64,
    ) -> Result<Self> {
        let theta = deg_to_rad(theta_deg);
        let approx = match assumption {
            SpectrumAssumption::Uniform { fc, bandwidth } => {
                approx_stcm_uniform(geometry, theta, phi, *fc, *bandwidth, m, dt)?
            }
            SpectrumAssumption::Psd { shape, quadrature } => {
                approx_stcm_psd(geometry, theta, phi, shape, m, dt, quadrature)?
            }
        };
        let basis = modal_basis(&approx)?;
        Ok(Self {
            theta_deg,
            gsv: basis.gsv(),
            sigma: basis.sigma,
            sbreve: approx.matrix,
        })
    }
}

/// Read-only table `theta grid -> (S̆, sigma, GSV)`.
#[derive(Debug, Clone)]
pub struct ModalCache {
    entries: Vec<ModalEntry>,
}

impl ModalCache {
    pub fn build(
        geometry: &ArrayGeometry,
        grid_deg: &[f64],
        phi: f64,
        assumption: &SpectrumAssumption,
        m: usize,
        dt: f64,
    ) -> Result<Self> {
        let entries = grid_deg
            .iter()
            .map(|&t| ModalEntry::compute(geometry, t, phi, assumption, m, dt))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<ModalEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("modal cache grid"));
        }
        let l = entries[0].gsv.len();
        for e in &entries {
            if e.gsv.len() != l || e.sbreve.rows() != l || e.sbreve.cols() != l {
                return Err(Error::DimensionMismatch {
                    expected: l,
                    found: e.gsv.len(),
                });
            }
        }
        if entries
            .windows(2)
            .any(|w| !(w[1].theta_deg > w[0].theta_deg))
        {
            return Err(Error::InvalidParameter(
                "modal cache grid must increase strictly".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ModalEntry] {
        &self.entries
    }

    pub fn grid_deg(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.theta_deg).collect()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].gsv.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ula8() -> ArrayGeometry {
        ArrayGeometry::ula(8, 1500.0 / 9000.0, 1500.0).unwrap()
    }

    #[test]
    fn unit_diagonal_and_hadamard_identity() {
        let s =
            approx_stcm_uniform(&ula8(), deg_to_rad(35.0), 0.0, 3000.0, 3000.0, 5, 1e-4).unwrap();
        let l = s.dim();
        for i in 0..l {
            assert_eq!(s.matrix()[(i, i)], C64::new(1.0, 0.0));
        }
        let prod = s.narrow().hadamard(s.wide());
        for r in 0..l {
            for c in 0..l {
                let a = s.matrix()[(r, c)];
                assert!((a - prod[(r, c)]).norm() <= 1e-12 * a.norm().max(1e-300) + 1e-15);
            }
        }
        assert!(s.matrix().hermitian_defect() < 1e-15);
    }

    #[test]
    fn sinc_zero_crossing_at_inverse_bandwidth() {
        // N_S = 1, dt = 1/B: adjacent temporal slots sit on the first zero
        let g = ArrayGeometry::new(alloc::vec![[0.0; 3]], 1500.0).unwrap();
        let s = approx_stcm_uniform(&g, 0.0, 0.0, 3000.0, 2000.0, 3, 1.0 / 2000.0).unwrap();
        assert!(s.wide()[(0, 1)].norm() < 1e-15);
        assert!(s.wide()[(0, 2)].norm() < 1e-15);
    }

    #[test]
    fn zero_bandwidth_is_rank_one() {
        let s = approx_stcm_uniform(&ula8(), 0.4, 0.0, 3000.0, 0.0, 3, 1e-4).unwrap();
        let b = modal_basis(&s).unwrap();
        assert!((b.sigma[0] - 24.0).abs() < 1e-10);
        assert!(b.sigma[1..].iter().all(|v| v.abs() < 1e-10));
        let g = s.g();
        let overlap = crate::linalg::dot(&b.gsv(), &g).norm() / libm::sqrt(24.0);
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_sum_to_dimension() {
        let s = approx_stcm_uniform(&ula8(), 1.0, 0.0, 3000.0, 2500.0, 4, 1e-4).unwrap();
        let b = modal_basis(&s).unwrap();
        let sum: f64 = b.sigma.iter().sum();
        assert!((sum - 32.0).abs() < 32.0 * 1e-9);
    }

    #[test]
    fn canonical_phase_is_real_positive() {
        let s = approx_stcm_uniform(&ula8(), 0.3, 0.0, 3000.0, 2500.0, 3, 1e-4).unwrap();
        let b = modal_basis(&s).unwrap();
        for c in 0..b.vectors.cols() {
            let col = b.vectors.column(c);
            let (idx, _) = col.iter().enumerate().fold((0, -1.0), |acc, (i, v)| {
                if v.norm() > acc.1 * (1.0 + 1e-12) {
                    (i, v.norm())
                } else {
                    acc
                }
            });
            assert!(col[idx].im.abs() < 1e-15 && col[idx].re > 0.0);
        }
    }

    #[test]
    fn asymptotic_block_limits() {
        let (_, spec) = asymptotic_sinf(4, 1.0).unwrap();
        assert!(spec.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let (_, spec) = asymptotic_sinf(4, 1e9).unwrap();
        assert!((spec[0] - 4.0).abs() < 1e-9);
        assert!(spec[1..].iter().all(|v| v.abs() < 1e-9));
        assert!(asymptotic_sinf(4, 0.0).is_err());
    }

    #[test]
    fn bounds_and_errors() {
        assert_eq!(bass_ale_bound(2, 5, 8).unwrap(), 26);
        assert!(bass_ale_bound(0, 5, 8).is_err());
        assert_eq!(
            effective_dim_max(&ula8(), 3, 3000.0, 0.0, 5, 1e-4, DEFAULT_RANK_TOL).unwrap(),
            3
        );
        assert!(effective_dim(&ula8(), &[], 0.0, 3000.0, 0.0, 5, 1e-4, DEFAULT_RANK_TOL).is_err());
        assert_eq!(
            effective_dim(&ula8(), &[0.2], 0.0, 3000.0, 0.0, 5, 1e-4, DEFAULT_RANK_TOL).unwrap(),
            1
        );
    }

    #[test]
    fn clusters_split_on_gaps() {
        let c = eigen_clusters(&[3.0, 1.0, 1.0, 0.0, 0.0], 1e-8);
        assert_eq!(c, alloc::vec![(0, 1), (1, 3), (3, 5)]);
    }

    #[test]
    fn line_spectrum_psd_is_narrowband() {
        let g = ula8();
        let line = PsdShape::Tabulated(alloc::vec![(3000.0, 1.0)]);
        let s = approx_stcm_psd(&g, 0.5, 0.0, &line, 3, 1e-4, &Quadrature::default()).unwrap();
        let n = approx_stcm_uniform(&g, 0.5, 0.0, 3000.0, 0.0, 3, 1e-4).unwrap();
        assert!(s.matrix().sub(n.matrix()).frobenius_norm() < 1e-12);
    }
}
