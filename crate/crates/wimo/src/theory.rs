//! Numerical self-checks of the approximate covariance model.
//!
//! Each check returns its measured quantity next to the threshold so that a
//! failure says by how much. `Injection::Perturb` adds `-1e-6 sigma_1 I` to
//! every `S̆` before it is checked, which must make the suite fail.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wimo_core::approx::{
    approx_stcm_psd, approx_stcm_uniform, asymptotic_sinf, band_average_power, factorization_check,
    modal_basis, ApproxStcm, ModalCache, Quadrature, SpectrumAssumption,
};
use wimo_core::estimators::{inverse_projection, spectrum_1wimo, NoiseProjector};
use wimo_core::geometry::steering_vector;
use wimo_core::linalg::{norm, CMatrix, HermitianEigen};
use wimo_core::math::{cis, db, deg_to_rad, sinc};
use wimo_core::{ArrayGeometry, PsdShape, C64};

use crate::config::ExperimentSpec;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Injection {
    #[default]
    None,
    Perturb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// A random aperture, direction, band, lag order and sampling interval.
#[derive(Debug, Clone)]
pub struct RandomConfig {
    pub geometry: ArrayGeometry,
    pub theta: f64,
    pub fc: f64,
    pub bandwidth: f64,
    pub m: usize,
    pub dt: f64,
    /// Gaussian PSD instead of a flat one.
    pub gaussian: bool,
}

impl RandomConfig {
    pub fn draw(rng: &mut ChaCha8Rng, allow_gaussian: bool) -> Result<Self> {
        let n = rng.random_range(1..=5);
        let positions = (0..n)
            .map(|_| {
                [
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                ]
            })
            .collect();
        let fc: f64 = rng.random_range(500.0..5000.0);
        Ok(Self {
            geometry: ArrayGeometry::new(positions, 1500.0)?,
            theta: deg_to_rad(rng.random_range(-90.0..90.0)),
            fc,
            bandwidth: 2.0 * fc * rng.random_range(0.0..1.0),
            m: rng.random_range(1..=7),
            dt: rng.random_range(2e-5..2e-4),
            gaussian: allow_gaussian && rng.random_bool(0.25),
        })
    }

    pub fn build(&self) -> Result<ApproxStcm> {
        if self.gaussian {
            // 3 dB width = the flat bandwidth, support clipped to +-3 sigma
            let bw = self.bandwidth.max(1.0);
            let s = PsdShape::gaussian_sigma(bw);
            let lo = (self.fc - 3.0 * s).max(1.0);
            let shape = PsdShape::Gaussian {
                fc: self.fc,
                bw3db: bw,
                band: (lo, self.fc + 3.0 * s),
            };
            Ok(approx_stcm_psd(
                &self.geometry,
                self.theta,
                0.0,
                &shape,
                self.m,
                self.dt,
                &Quadrature::default(),
            )?)
        } else {
            Ok(approx_stcm_uniform(
                &self.geometry,
                self.theta,
                0.0,
                self.fc,
                self.bandwidth,
                self.m,
                self.dt,
            )?)
        }
    }
}

fn inject(s: ApproxStcm, injection: Injection) -> Result<ApproxStcm> {
    match injection {
        Injection::None => Ok(s),
        Injection::Perturb => {
            let top = HermitianEigen::new(s.matrix())?.values[0];
            let delta = CMatrix::identity(s.dim()).scaled(-1e-6 * top);
            Ok(s.perturbed(&delta)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    pub configs: usize,
    /// `min over configs and factors of lambda_min / sigma_1(S̆)`.
    pub worst_ratio: f64,
}

impl PsdReport {
    pub const TOL: f64 = -1e-10;

    pub fn passed(&self) -> bool {
        self.worst_ratio >= Self::TOL
    }
}

/// Smallest eigenvalue of `S̆^N`, `S̆^W` and `S̆`, relative to `sigma_1(S̆)`.
pub fn psd_suite(seed: u64, configs: usize, injection: Injection) -> Result<PsdReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..configs {
        let s = inject(RandomConfig::draw(&mut rng, true)?.build()?, injection)?;
        let full = HermitianEigen::new(s.matrix())?;
        let top = full.values[0].max(f64::MIN_POSITIVE);
        for m in [s.narrow(), s.wide()] {
            worst = worst.min(*HermitianEigen::new(m)?.values.last().unwrap() / top);
        }
        worst = worst.min(*full.values.last().unwrap() / top);
    }
    Ok(PsdReport {
        configs,
        worst_ratio: worst,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationSuiteReport {
    pub configs: usize,
    pub worst_eigenvalue_mismatch: f64,
    pub worst_angle: f64,
}

impl FactorizationSuiteReport {
    pub const EIGENVALUE_TOL: f64 = 1e-9;
    pub const ANGLE_TOL: f64 = 1e-6;

    pub fn eigenvalues_match(&self) -> bool {
        self.worst_eigenvalue_mismatch <= Self::EIGENVALUE_TOL
    }

    pub fn subspaces_match(&self) -> bool {
        self.worst_angle < Self::ANGLE_TOL
    }
}

/// Shared eigenvalues and Hadamard-lifted eigenvectors of `S̆` and `S̆^W`.
pub fn factorization_suite(
    seed: u64,
    configs: usize,
    injection: Injection,
) -> Result<FactorizationSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mismatch, mut angle) = (0.0f64, 0.0f64);
    for _ in 0..configs {
        let s = inject(RandomConfig::draw(&mut rng, true)?.build()?, injection)?;
        let report = factorization_check(&s, &modal_basis(&s)?)?;
        mismatch = mismatch.max(report.eigenvalue_mismatch);
        angle = angle.max(report.max_angle());
    }
    Ok(FactorizationSuiteReport {
        configs,
        worst_eigenvalue_mismatch: mismatch,
        worst_angle: angle,
    })
}

/// Largest deviation of `S̆^N`'s normalized spectrum from `(1, 0, ..., 0)`
/// and the sine of the angle between its top eigenvector and `g`.
pub fn narrow_factor_deviation(s: &ApproxStcm) -> Result<(f64, f64)> {
    let eig = HermitianEigen::new(s.narrow())?;
    let trace = s.narrow().trace().re;
    let spectrum_dev = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v / trace - if i == 0 { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    let g = s.g();
    let u = eig.vector(0);
    let overlap = wimo_core::linalg::dot(&u, &g).norm() / (norm(&u) * norm(&g));
    Ok((spectrum_dev, (1.0 - overlap * overlap).max(0.0).sqrt()))
}

/// `(band power of u^W_1, largest band power over random unit probes)`.
pub fn gsv_band_power(s: &ApproxStcm, probes: usize, seed: u64) -> Result<(f64, f64)> {
    let eig = HermitianEigen::new(s.wide())?;
    let h = s.model().h();
    let b = s.bandwidth();
    let panels = 400;
    let top = band_average_power(&eig.vector(0), h, b, panels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..probes {
        let x: Vec<C64> = (0..h.len())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let n = norm(&x);
        let x: Vec<C64> = x.into_iter().map(|z| z / n).collect();
        best = best.max(band_average_power(&x, h, b, panels));
    }
    Ok((top, best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarrowbandLimitReport {
    /// `||S̆ - a a^H||_F / ||a a^H||_F`.
    pub matrix_error: f64,
    /// `max_i |sigma_i - (L, 0, ..., 0)_i|`.
    pub eigenvalue_error: f64,
    /// Max abs difference of the 1-WIMO and narrowband MUSIC dB spectra.
    pub spectrum_db_error: f64,
}

impl NarrowbandLimitReport {
    pub const TOL: f64 = 1e-6;

    pub fn passed(&self) -> bool {
        self.matrix_error < Self::TOL
            && self.eigenvalue_error < Self::TOL
            && self.spectrum_db_error < Self::TOL
    }
}

/// `B = 1e-6 fc`, `m = 1`: `S̆` collapses to `a a^H` and 1-WIMO to MUSIC on
/// the exact covariance of two sources in unit noise.
pub fn narrowband_limit(
    geometry: &ArrayGeometry,
    fc: f64,
    thetas_deg: [f64; 2],
) -> Result<NarrowbandLimitReport> {
    let bandwidth = fc * 1e-6;
    let dt = 1.0 / (4.0 * fc);
    let l = geometry.n_sensors();
    let probe = deg_to_rad(thetas_deg[0]);
    let s = approx_stcm_uniform(geometry, probe, 0.0, fc, bandwidth, 1, dt)?;
    let a = steering_vector(geometry, probe, 0.0, fc);
    let aa = CMatrix::outer(&a);
    let matrix_error = s.matrix().sub(&aa).frobenius_norm() / aa.frobenius_norm();
    let sigma = modal_basis(&s)?.sigma;
    let eigenvalue_error = sigma
        .iter()
        .enumerate()
        .map(|(i, v)| (v - if i == 0 { l as f64 } else { 0.0 }).abs())
        .fold(0.0, f64::max);

    let mut r = CMatrix::identity(l);
    for t in thetas_deg {
        let v = steering_vector(geometry, deg_to_rad(t), 0.0, fc);
        r = r.add(&CMatrix::outer(&v).scaled(10.0));
    }
    let eig = HermitianEigen::new(&r)?;
    let pi = NoiseProjector::from_basis(&eig.vectors.column_block(2, l));
    // grid offset from the sources keeps both spectra off their floors
    let grid: Vec<f64> = (0..180).map(|i| -89.75 + i as f64).collect();
    let assumption = SpectrumAssumption::Uniform { fc, bandwidth };
    let cache = ModalCache::build(geometry, &grid, 0.0, &assumption, 1, dt)?;
    let wimo = spectrum_1wimo(&pi, &cache, 1)?;
    let mut spectrum_db_error = 0.0f64;
    for (t, w) in grid.iter().zip(&wimo.values) {
        let v: Vec<C64> = steering_vector(geometry, deg_to_rad(*t), 0.0, fc)
            .into_iter()
            .map(|z| z / (l as f64).sqrt())
            .collect();
        let music = inverse_projection(&pi, &v)?;
        spectrum_db_error = spectrum_db_error.max((db(*w) - db(music)).abs());
    }
    Ok(NarrowbandLimitReport {
        matrix_error,
        eigenvalue_error,
        spectrum_db_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidebandLimitReport {
    /// `S̆^inf` block spectrum, descending.
    pub block_spectrum: Vec<f64>,
    /// `(B / f0, ||sigma - sigma_inf||_2 / ||sigma_inf||_2)` per doubling.
    pub errors: Vec<(f64, f64)>,
}

impl WidebandLimitReport {
    pub const TOL: f64 = 0.05;

    pub fn final_error(&self) -> f64 {
        self.errors.last().map_or(f64::INFINITY, |e| e.1)
    }

    pub fn monotone(&self) -> bool {
        self.errors.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn passed(&self) -> bool {
        self.final_error() < Self::TOL && self.monotone()
    }
}

/// ULA with `d = c / 2 f0`, `fs = nu B`: as `B` doubles from `f0` to
/// `32 f0` the spectrum of `S̆` approaches `N_S` copies of the `m x m` sinc
/// block spectrum.
pub fn wideband_limit(
    n_sensors: usize,
    m: usize,
    theta_deg: f64,
    nu: f64,
) -> Result<WidebandLimitReport> {
    let (c, f0) = (1500.0, 1000.0);
    let geometry = ArrayGeometry::ula(n_sensors, c / (2.0 * f0), c)?;
    let (_, block) = asymptotic_sinf(m, nu)?;
    let mut target: Vec<f64> = block
        .iter()
        .flat_map(|v| std::iter::repeat_n(*v, n_sensors))
        .collect();
    target.sort_by(|a, b| b.total_cmp(a));
    let target_norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut errors = Vec::new();
    for k in 0..=5 {
        let b = f0 * f64::from(1 << k);
        let s = approx_stcm_uniform(
            &geometry,
            deg_to_rad(theta_deg),
            0.0,
            f0,
            b,
            m,
            1.0 / (nu * b),
        )?;
        let sigma = modal_basis(&s)?.sigma;
        let err = sigma
            .iter()
            .zip(&target)
            .map(|(a, t)| (a - t).powi(2))
            .sum::<f64>()
            .sqrt()
            / target_norm;
        errors.push((b / f0, err));
    }
    Ok(WidebandLimitReport {
        block_spectrum: block,
        errors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripReport {
    /// `(Omega / Omega_0, rms reconstruction error)`.
    pub errors: Vec<(f64, f64)>,
    /// Largest gap between the quadrature and the closed-form reconstruction.
    pub quadrature_gap: f64,
}

impl RoundTripReport {
    /// Error ratio per doubling must be `0.5 +- 20%`.
    pub const RATIO_RANGE: (f64, f64) = (0.4, 0.6);

    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[1].1 / w[0].1).collect()
    }

    pub fn passed(&self) -> bool {
        let (lo, hi) = Self::RATIO_RANGE;
        self.quadrature_gap < 1e-6 && self.ratios().iter().all(|r| (lo..=hi).contains(r))
    }
}

/// Composite Simpson of `(1/Omega) int_{-Omega/2}^{Omega/2} Y(f) e^{j 2 pi h_k f} df`
/// with `Y(f) = sum_l y_l e^{-j 2 pi h_l f}`.
fn inverse_transform(y: &[C64], h: &[f64], k: usize, omega: f64) -> C64 {
    let span = h.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b))
        - h.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let panels = ((64.0 * omega * span.max(1e-3)).ceil() as usize).max(64) & !1;
    let step = omega / panels as f64;
    let integrand = |f: f64| -> C64 {
        y.iter()
            .zip(h)
            .map(|(yl, hl)| yl * cis(2.0 * PI * (h[k] - hl) * f))
            .sum()
    };
    let mut acc = integrand(-0.5 * omega) + integrand(0.5 * omega);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += integrand(-0.5 * omega + i as f64 * step) * w;
    }
    acc * (step / 3.0) / omega
}

/// Inverse SO-transform of `Y` over growing spans: the error against `y`
/// decays like `1 / Omega`. Each vector has its own random sample positions
/// in `[0, 1]` with pairwise gaps of at least 0.05.
pub fn so_roundtrip(
    seed: u64,
    vectors: usize,
    len: usize,
    omega0: f64,
    doublings: u32,
) -> Result<RoundTripReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(vectors);
    while cases.len() < vectors {
        let mut h: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut sorted = h.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] < 0.05) {
            continue;
        }
        let y: Vec<C64> = (0..len)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        h.shrink_to_fit();
        cases.push((y, h));
    }
    let mut errors = Vec::new();
    let mut quadrature_gap = 0.0f64;
    for d in 0..=doublings {
        let omega = omega0 * f64::from(1 << d);
        let (mut sq, mut count) = (0.0, 0usize);
        for (y, h) in &cases {
            for k in 0..len {
                let rec = inverse_transform(y, h, k, omega);
                let closed: C64 = y
                    .iter()
                    .zip(h)
                    .map(|(yl, hl)| yl * sinc(omega * (h[k] - hl)))
                    .sum();
                quadrature_gap = quadrature_gap.max((rec - closed).norm());
                sq += (rec - y[k]).norm_sqr();
                count += 1;
            }
        }
        errors.push((f64::from(1 << d), (sq / count as f64).sqrt()));
    }
    Ok(RoundTripReport {
        errors,
        quadrature_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub psd_configs: usize,
    pub factorization_configs: usize,
    pub injection: Injection,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            psd_configs: 200,
            factorization_configs: 100,
            injection: Injection::None,
        }
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail,
    }
}

/// The full property suite; the config supplies the array, band, lag order
/// and grid for the scenario-specific checks.
pub fn run_suite(spec: &ExperimentSpec, opts: &SuiteOptions) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let psd = psd_suite(opts.seed, opts.psd_configs, opts.injection)?;
    out.push(outcome(
        "psd",
        psd.passed(),
        format!(
            "{} random configs, min eigenvalue / sigma_1 = {:.3e} (>= {:.0e})",
            psd.configs,
            psd.worst_ratio,
            PsdReport::TOL
        ),
    ));
    let t1 = factorization_suite(
        opts.seed.wrapping_add(1),
        opts.factorization_configs,
        opts.injection,
    )?;
    out.push(outcome(
        "shared-eigenvalues",
        t1.eigenvalues_match(),
        format!(
            "{} random configs, max |sigma(S) - sigma(S^W)| / sigma_1 = {:.3e} (<= 1e-9)",
            t1.configs, t1.worst_eigenvalue_mismatch
        ),
    ));
    out.push(outcome(
        "hadamard-eigenvectors",
        t1.subspaces_match(),
        format!(
            "{} random configs, max principal angle = {:.3e} rad (< 1e-6)",
            t1.configs, t1.worst_angle
        ),
    ));

    let geometry = spec.geometry()?;
    let assumption = spec.assumption();
    let (m, dt) = (spec.estimator.m, spec.dt());
    let grid = spec.grid()?;
    let (mut worst_mismatch, mut worst_angle, mut worst_narrow, mut worst_align) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut band_power_ok = true;
    let mut band_power_margin = f64::INFINITY;
    for (i, t) in grid.iter().enumerate() {
        let s = match &assumption {
            SpectrumAssumption::Uniform { fc, bandwidth } => {
                approx_stcm_uniform(&geometry, deg_to_rad(*t), 0.0, *fc, *bandwidth, m, dt)?
            }
            SpectrumAssumption::Psd { shape, quadrature } => {
                approx_stcm_psd(&geometry, deg_to_rad(*t), 0.0, shape, m, dt, quadrature)?
            }
        };
        let (dev, align) = narrow_factor_deviation(&s)?;
        worst_narrow = worst_narrow.max(dev);
        worst_align = worst_align.max(align);
        if i % 15 == 0 && s.bandwidth() > 0.0 {
            let (top, best) = gsv_band_power(&s, 200, opts.seed.wrapping_add(i as u64))?;
            band_power_margin = band_power_margin.min(top - best);
            band_power_ok &= best <= top * (1.0 + 1e-9);
        }
        let s = inject(s, opts.injection)?;
        let report = factorization_check(&s, &modal_basis(&s)?)?;
        worst_mismatch = worst_mismatch.max(report.eigenvalue_mismatch);
        worst_angle = worst_angle.max(report.max_angle());
    }
    out.push(outcome(
        "config-grid-factorization",
        worst_mismatch <= 1e-9 && worst_angle < 1e-6,
        format!(
            "{} grid directions, eigenvalue mismatch {:.3e}, principal angle {:.3e} rad",
            grid.len(),
            worst_mismatch,
            worst_angle
        ),
    ));
    out.push(outcome(
        "narrowband-factor",
        worst_narrow < 1e-9 && worst_align < 1e-6,
        format!("normalized spectrum deviation {worst_narrow:.3e}, top-vector misalignment with g {worst_align:.3e}"),
    ));
    out.push(outcome(
        "gsv-max-band-power",
        band_power_ok,
        format!("band power of u^W_1 minus best random probe = {band_power_margin:.3e}"),
    ));

    let nb = narrowband_limit(&geometry, assumption.center(), [-10.0, 20.0])?;
    out.push(outcome(
        "narrowband-limit",
        nb.passed(),
        format!(
            "B = 1e-6 fc, m = 1: matrix {:.2e}, eigenvalues {:.2e}, 1-WIMO vs MUSIC {:.2e} dB (all < 1e-6)",
            nb.matrix_error, nb.eigenvalue_error, nb.spectrum_db_error
        ),
    ));
    let wb = wideband_limit(4, 4, 40.0, 2.0)?;
    out.push(outcome(
        "wideband-limit",
        wb.passed(),
        format!(
            "relative spectrum error at B/f0 = {}: {}; monotone = {}",
            wb.errors
                .iter()
                .map(|e| e.0.to_string())
                .collect::<Vec<_>>()
                .join(","),
            wb.errors
                .iter()
                .map(|e| format!("{:.4}", e.1))
                .collect::<Vec<_>>()
                .join(","),
            wb.monotone()
        ),
    ));
    let rt = so_roundtrip(opts.seed.wrapping_add(2), 20, 8, 50.0, 3)?;
    out.push(outcome(
        "so-roundtrip",
        rt.passed(),
        format!(
            "error ratio per doubling {} (expected 0.5 +- 20%), quadrature vs closed form {:.2e}",
            rt.ratios()
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
                .join(","),
            rt.quadrature_gap
        ),
    ));
    Ok(out)
}
