//! Spatial spectra (1-WIMO, p-WIMO), the SS-Transform, space-frequency
//! distributions and peak extraction.
//!
//! Both WIMO spectra take the noise projector `Pi = U_n U_n^H` once, so each
//! grid point costs `O(L^2)` whatever the bandwidth:
//!
//! ```text
//! P_1(theta) = 1 / (u1^H Pi u1)            u1 = GSV of S̆(theta)
//! P_p(theta) = 1 / sum_kl S̆_kl Pi_lk       = 1 / trace(U_n^H S̆ U_n)
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::approx::{ModalCache, ModalEntry};
use crate::error::{Error, Result};
use crate::geometry::{build_stacked_model, ArrayGeometry, StackedModel};
use crate::linalg::{CMatrix, Cholesky};
use crate::math::{cis, db, deg_to_rad};
use crate::stcm::check_split_order;
use crate::C64;

/// Relative floor on inverse-orthogonality denominators.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Diagonal loading for MVDR, relative to `trace(S) / L`.
pub const MVDR_LOADING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    OneWimo,
    PWimo,
    SfCbf,
    SfMvdr,
    SfMusic,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::OneWimo,
        Method::PWimo,
        Method::SfCbf,
        Method::SfMvdr,
        Method::SfMusic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::OneWimo => "1-wimo",
            Method::PWimo => "p-wimo",
            Method::SfCbf => "sf-cbf",
            Method::SfMvdr => "sf-mvdr",
            Method::SfMusic => "sf-music",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method '{s}'")))
    }

    /// Methods that need a noise subspace.
    pub fn needs_order(self) -> bool {
        matches!(self, Method::OneWimo | Method::PWimo | Method::SfMusic)
    }
}

/// Noise-subspace projector `U_n U_n^H` together with the split order.
#[derive(Debug, Clone)]
pub struct NoiseProjector {
    pi: CMatrix,
    p: usize,
}

impl NoiseProjector {
    pub fn new(pi: CMatrix, p: usize) -> Result<Self> {
        if !pi.is_square() {
            return Err(Error::DimensionMismatch {
                expected: pi.rows(),
                found: pi.cols(),
            });
        }
        Ok(Self { pi, p })
    }

    pub fn from_split(split: &crate::stcm::SubspaceSplit) -> Self {
        Self {
            pi: split.noise_projector(),
            p: split.p(),
        }
    }

    /// Projector onto the span of the given orthonormal columns.
    pub fn from_basis(un: &CMatrix) -> Self {
        let p = un.rows() - un.cols();
        Self {
            pi: crate::stcm::projector(un),
            p,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.pi
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.pi.rows()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }
}

fn inverse_floored(denominator: f64, scale: f64) -> f64 {
    1.0 / denominator.max(DENOMINATOR_FLOOR * scale)
}

/// `1 / (v^H Pi v)` with the floor scaled by `v^H v`.
pub fn inverse_projection(pi: &NoiseProjector, v: &[C64]) -> Result<f64> {
    pi.check(v.len())?;
    let scale: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    Ok(inverse_floored(pi.pi.quad_form(v).re, scale))
}

/// 1-WIMO value for one direction.
pub fn one_wimo_value(pi: &NoiseProjector, gsv: &[C64]) -> Result<f64> {
    inverse_projection(pi, gsv)
}

/// p-WIMO value for one direction: `1 / sum_kl S̆_kl Pi_lk`.
pub fn pwimo_value(pi: &NoiseProjector, sbreve: &CMatrix) -> Result<f64> {
    pi.check(sbreve.rows())?;
    let l = sbreve.rows();
    let mut acc = 0.0;
    let mut scale = 0.0;
    for k in 0..l {
        let srow = sbreve.row(k);
        for (ll, s) in srow.iter().enumerate() {
            let p = pi.pi[(ll, k)];
            acc += s.re * p.re - s.im * p.im;
        }
        scale += srow[k].re;
    }
    Ok(inverse_floored(acc, scale))
}

/// Value of `method` at one cached grid point. Only the WIMO methods apply.
pub fn wimo_value(method: Method, pi: &NoiseProjector, entry: &ModalEntry) -> Result<f64> {
    match method {
        Method::OneWimo => one_wimo_value(pi, &entry.gsv),
        Method::PWimo => pwimo_value(pi, &entry.sbreve),
        other => Err(Error::InvalidParameter(format!(
            "{} is not a WIMO method",
            other.as_str()
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum {
    pub grid_deg: Vec<f64>,
    /// Linear scale, finite and positive.
    pub values: Vec<f64>,
    pub method: Method,
    pub m: usize,
    pub p: Option<usize>,
}

impl SpatialSpectrum {
    pub fn new(
        grid_deg: Vec<f64>,
        values: Vec<f64>,
        method: Method,
        m: usize,
        p: Option<usize>,
    ) -> Result<Self> {
        if grid_deg.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: grid_deg.len(),
                found: values.len(),
            });
        }
        if grid_deg.is_empty() {
            return Err(Error::EmptyInput("spectrum grid"));
        }
        if grid_deg.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "spectrum grid must increase strictly".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "spectrum values must be finite and positive, found {v}"
            )));
        }
        Ok(Self {
            grid_deg,
            values,
            method,
            m,
            p,
        })
    }

    pub fn values_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| db(*v)).collect()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

fn wimo_spectrum(
    method: Method,
    pi: &NoiseProjector,
    cache: &ModalCache,
    m: usize,
) -> Result<SpatialSpectrum> {
    let values = cache
        .entries()
        .iter()
        .map(|e| wimo_value(method, pi, e))
        .collect::<Result<Vec<_>>>()?;
    SpatialSpectrum::new(cache.grid_deg(), values, method, m, Some(pi.p))
}

/// `P(theta) = 1 / (u1^H U_n U_n^H u1)` over the cache grid.
pub fn spectrum_1wimo(
    pi: &NoiseProjector,
    cache: &ModalCache,
    m: usize,
) -> Result<SpatialSpectrum> {
    wimo_spectrum(Method::OneWimo, pi, cache, m)
}

/// `P(theta) = 1 / trace(U_n^H S̆(theta) U_n)` over the cache grid.
pub fn spectrum_pwimo(
    pi: &NoiseProjector,
    cache: &ModalCache,
    m: usize,
) -> Result<SpatialSpectrum> {
    wimo_spectrum(Method::PWimo, pi, cache, m)
}

/// `sum_k y_k exp(-j 2 pi h_k f)`.
pub fn ss_transform(y: &[C64], model: &StackedModel, f: f64) -> Result<C64> {
    if y.len() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: model.len(),
            found: y.len(),
        });
    }
    Ok(y.iter()
        .zip(model.h())
        .map(|(yk, hk)| yk * cis(-2.0 * PI * hk * f))
        .sum())
}

/// `g^H S g`.
pub fn sf_cbf(s: &CMatrix, g: &[C64]) -> Result<f64> {
    if g.len() != s.rows() {
        return Err(Error::DimensionMismatch {
            expected: s.rows(),
            found: g.len(),
        });
    }
    Ok(s.quad_form(g).re)
}

/// Factored, diagonally loaded `S + delta tr(S)/L I` for repeated MVDR
/// evaluation.
#[derive(Debug, Clone)]
pub struct MvdrSolver {
    chol: Cholesky,
    dim: usize,
}

impl MvdrSolver {
    pub fn new(s: &CMatrix) -> Result<Self> {
        Self::with_loading(s, MVDR_LOADING)
    }

    pub fn with_loading(s: &CMatrix, delta: f64) -> Result<Self> {
        let l = s.rows();
        let load = delta * s.trace().re / l as f64;
        let mut loaded = s.clone();
        for i in 0..l {
            loaded[(i, i)] += load;
        }
        Ok(Self {
            chol: Cholesky::new(&loaded)?,
            dim: l,
        })
    }

    /// `1 / (g^H S^-1 g)`.
    pub fn value(&self, g: &[C64]) -> Result<f64> {
        if g.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: g.len(),
            });
        }
        let x = self.chol.solve(g);
        let den: f64 = g.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
        if !(den > 0.0) {
            return Err(Error::SingularMatrix);
        }
        Ok(1.0 / den)
    }
}

/// `1 / (g^H U_n U_n^H g)`.
pub fn sf_music(pi: &NoiseProjector, g: &[C64]) -> Result<f64> {
    inverse_projection(pi, g)
}

/// What a space-frequency map is evaluated from.
pub enum SfInput<'a> {
    Cbf(&'a CMatrix),
    Mvdr(&'a MvdrSolver),
    Music(&'a NoiseProjector),
}

impl SfInput<'_> {
    pub fn method(&self) -> Method {
        match self {
            SfInput::Cbf(_) => Method::SfCbf,
            SfInput::Mvdr(_) => Method::SfMvdr,
            SfInput::Music(_) => Method::SfMusic,
        }
    }

    pub fn value(&self, g: &[C64]) -> Result<f64> {
        match self {
            SfInput::Cbf(s) => sf_cbf(s, g),
            SfInput::Mvdr(solver) => solver.value(g),
            SfInput::Music(pi) => sf_music(pi, g),
        }
    }
}

/// Space-frequency distribution, row-major `freqs x thetas`.
#[derive(Debug, Clone, PartialEq)]
pub struct FtMap {
    pub method: Method,
    pub freqs: Vec<f64>,
    pub thetas_deg: Vec<f64>,
    pub values: Vec<f64>,
}

impl FtMap {
    pub fn at(&self, fi: usize, ti: usize) -> f64 {
        self.values[fi * self.thetas_deg.len() + ti]
    }

    /// Mean over frequency for each direction.
    pub fn collapse_frequency(&self) -> Vec<f64> {
        let nt = self.thetas_deg.len();
        let nf = self.freqs.len().max(1) as f64;
        (0..nt)
            .map(|t| (0..self.freqs.len()).map(|f| self.at(f, t)).sum::<f64>() / nf)
            .collect()
    }
}

/// One row of an f-theta map: every direction at frequency `f`.
pub fn sf_row(input: &SfInput<'_>, models: &[StackedModel], f: f64) -> Result<Vec<f64>> {
    models
        .iter()
        .map(|model| input.value(&model.g_vector(f)))
        .collect()
}

/// Stacked models for every grid direction.
pub fn grid_models(
    geometry: &ArrayGeometry,
    thetas_deg: &[f64],
    phi: f64,
    m: usize,
    dt: f64,
) -> Result<Vec<StackedModel>> {
    thetas_deg
        .iter()
        .map(|t| build_stacked_model(geometry, deg_to_rad(*t), phi, m, dt))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn sf_map(
    input: &SfInput<'_>,
    geometry: &ArrayGeometry,
    m: usize,
    dt: f64,
    freqs: &[f64],
    thetas_deg: &[f64],
    phi: f64,
) -> Result<FtMap> {
    if freqs.is_empty() || thetas_deg.is_empty() {
        return Err(Error::EmptyInput("f-theta grid"));
    }
    let models = grid_models(geometry, thetas_deg, phi, m, dt)?;
    let mut values = Vec::with_capacity(freqs.len() * thetas_deg.len());
    for &f in freqs {
        values.extend(sf_row(input, &models, f)?);
    }
    Ok(FtMap {
        method: input.method(),
        freqs: freqs.to_vec(),
        thetas_deg: thetas_deg.to_vec(),
        values,
    })
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![start],
        n => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Angle grid `start, start + step, ...` up to `stop` (inclusive within a
/// hundredth of a step).
pub fn angle_grid(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || !(stop_deg >= start_deg) {
        return Err(Error::InvalidParameter(format!(
            "angle grid needs step > 0 and stop >= start, got [{start_deg}, {stop_deg}] step {step_deg}"
        )));
    }
    if start_deg < -90.0 || stop_deg > 90.0 {
        return Err(Error::InvalidParameter(
            "angle grid must lie inside [-90, 90] degrees".into(),
        ));
    }
    let n = libm::floor((stop_deg - start_deg) / step_deg + 0.01) as usize + 1;
    Ok((0..n).map(|i| start_deg + i as f64 * step_deg).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub theta_deg: f64,
    pub height_db: f64,
    pub prominence_db: f64,
    /// Grid index of the (left end of the) maximum.
    pub index: usize,
}

/// Peaks sorted by height, highest first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn angles(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.theta_deg).collect()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    pub min_prominence_db: f64,
    pub max_count: Option<usize>,
    /// Sub-grid refinement by 3-point parabolic interpolation.
    pub refine: bool,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            min_prominence_db: crate::metrics::RESOLUTION_MIN_PROMINENCE_DB,
            max_count: None,
            refine: true,
        }
    }
}

/// Interior local maxima of the dB spectrum with topographic prominence at
/// least `min_prominence_db`. A flat top counts once, at its lowest index.
pub fn find_peaks(spectrum: &SpatialSpectrum, opts: &PeakOptions) -> PeakSet {
    let v = spectrum.values_db();
    let n = v.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if v[i] > v[i - 1] {
            let mut j = i;
            while j + 1 < n && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < n && v[j + 1] < v[i] {
                let prominence = prominence(&v, i, j);
                if prominence >= opts.min_prominence_db {
                    let theta_deg = if opts.refine {
                        refine(spectrum, &v, i)
                    } else {
                        spectrum.grid_deg[i]
                    };
                    peaks.push(Peak {
                        theta_deg,
                        height_db: v[i],
                        prominence_db: prominence,
                        index: i,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks.sort_by(|a, b| {
        b.height_db
            .total_cmp(&a.height_db)
            .then(a.index.cmp(&b.index))
    });
    if let Some(k) = opts.max_count {
        peaks.truncate(k);
    }
    PeakSet { peaks }
}

/// Height above the higher of the two bases, each the lowest point between
/// the plateau `[lo, hi]` and the nearest strictly higher sample (or edge).
fn prominence(v: &[f64], lo: usize, hi: usize) -> f64 {
    let h = v[lo];
    let mut left_min = h;
    for k in (0..lo).rev() {
        if v[k] > h {
            break;
        }
        left_min = left_min.min(v[k]);
    }
    let mut right_min = h;
    for &x in &v[hi + 1..] {
        if x > h {
            break;
        }
        right_min = right_min.min(x);
    }
    (h - left_min.max(right_min)).max(0.0)
}

/// Offset of the vertex of the parabola through `(-1, a), (0, b), (1, c)`,
/// when it opens in the expected direction.
fn vertex(a: f64, b: f64, c: f64, minimum: bool) -> Option<f64> {
    let curv = a - 2.0 * b + c;
    let ok = if minimum { curv > 0.0 } else { curv < 0.0 };
    (ok && curv.is_finite()).then(|| (0.5 * (a - c) / curv).clamp(-0.5, 0.5))
}

/// Fits the reciprocal spectrum, which is locally quadratic around an
/// inverse-orthogonality peak; falls back to the dB samples.
fn refine(spectrum: &SpatialSpectrum, v_db: &[f64], i: usize) -> f64 {
    let p = &spectrum.values;
    let offset = vertex(1.0 / p[i - 1], 1.0 / p[i], 1.0 / p[i + 1], true)
        .or_else(|| vertex(v_db[i - 1], v_db[i], v_db[i + 1], false))
        .unwrap_or(0.0);
    let g = &spectrum.grid_deg;
    let step = if offset >= 0.0 {
        g[i + 1] - g[i]
    } else {
        g[i] - g[i - 1]
    };
    g[i] + offset * step
}

/// How the signal-subspace order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderRule {
    Auto,
    Manual(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderChoice {
    pub p: usize,
    pub p_mdl: usize,
    /// MDL detected no source.
    pub mdl_empty: bool,
}

/// Allowed `P` range for the automatic rule: `[ceil(0.2 L), floor(0.6 L)]`
/// for 1-WIMO and SF-MUSIC, `[ceil(0.5 L), floor(0.7 L)]` for p-WIMO, both
/// kept inside `[1, L - 1]`.
pub fn auto_order_range(method: Method, l: usize) -> (usize, usize) {
    let (a, b) = match method {
        Method::PWimo => (5, 7),
        _ => (2, 6),
    };
    let lo = (a * l).div_ceil(10).max(1);
    let hi = (b * l / 10).min(l.saturating_sub(1)).max(lo);
    (lo, hi)
}

/// Applies the order rule. `p_mdl` is the MDL estimate and `eps_max_one`
/// the single-source effective-dimension bound.
pub fn select_order(
    rule: OrderRule,
    method: Method,
    l: usize,
    p_mdl: usize,
    eps_max_one: usize,
) -> Result<OrderChoice> {
    let mdl_empty = p_mdl == 0;
    let p = match rule {
        OrderRule::Manual(p) => p,
        OrderRule::Auto => {
            let (lo, hi) = auto_order_range(method, l);
            p_mdl.max(1).max(eps_max_one).clamp(lo, hi)
        }
    };
    check_split_order(p, l)?;
    Ok(OrderChoice {
        p,
        p_mdl,
        mdl_empty,
    })
}

/// Advisory real-operation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperationCount {
    pub covariance: u64,
    pub evd: u64,
    pub spectrum: u64,
}

impl OperationCount {
    pub fn total(&self) -> u64 {
        self.covariance + self.evd + self.spectrum
    }
}

/// Rough flop counts: covariance `8 L^2 / 2` per stacked vector, Jacobi EVD
/// about `30 L^3`, and `8 L^2` per grid point for either WIMO spectrum
/// (independent of the bandwidth).
pub fn operation_count(
    method: Method,
    l: usize,
    n_vectors: usize,
    n_grid: usize,
    n_freqs: usize,
) -> OperationCount {
    let l2 = (l * l) as u64;
    let spectrum = match method {
        Method::OneWimo | Method::PWimo => 8 * l2 * n_grid as u64,
        Method::SfCbf | Method::SfMusic => 8 * l2 * (n_grid * n_freqs) as u64,
        Method::SfMvdr => 8 * l2 * (n_grid * n_freqs) as u64 + l2 * l as u64,
    };
    OperationCount {
        covariance: 4 * l2 * n_vectors as u64,
        evd: 30 * l2 * l as u64,
        spectrum,
    }
}

/// Human-readable one-line summary of a peak set.
pub fn describe_peaks(peaks: &PeakSet) -> String {
    let mut out = String::new();
    for (i, p) in peaks.peaks.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!(
            "{:.2} deg ({:.1} dB, prom {:.1} dB)",
            p.theta_deg, p.height_db, p.prominence_db
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{approx_stcm_uniform, modal_basis, SpectrumAssumption};
    use crate::geometry::steering_vector;
    use crate::linalg::HermitianEigen;

    fn spec(values: Vec<f64>) -> SpatialSpectrum {
        let grid = (0..values.len()).map(|i| i as f64).collect();
        SpatialSpectrum::new(grid, values, Method::OneWimo, 1, Some(1)).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.as_str()).unwrap(), m);
        }
        assert!(Method::parse("music").is_err());
    }

    #[test]
    fn monotone_spectrum_has_no_peaks() {
        let s = spec((1..50).map(|i| i as f64).collect());
        assert!(find_peaks(&s, &PeakOptions::default()).is_empty());
    }

    #[test]
    fn plateau_tie_goes_to_lowest_index() {
        let s = spec(alloc::vec![1.0, 2.0, 10.0, 10.0, 10.0, 2.0, 1.0]);
        let p = find_peaks(
            &s,
            &PeakOptions {
                refine: false,
                ..Default::default()
            },
        );
        assert_eq!(p.len(), 1);
        assert_eq!(p.peaks[0].index, 2);
    }

    #[test]
    fn prominence_filters_ripples() {
        // 10 dB main lobe, a 1 dB ripple on its flank
        let v: Vec<f64> = [0.0, 3.0, 2.0, 10.0, 0.0, 0.5, 0.0]
            .iter()
            .map(|d| libm::pow(10.0, d / 10.0))
            .collect();
        let p = find_peaks(
            &spec(v),
            &PeakOptions {
                refine: false,
                ..Default::default()
            },
        );
        assert_eq!(p.len(), 1);
        assert_eq!(p.peaks[0].index, 3);
        assert!((p.peaks[0].prominence_db - 10.0).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_parabola_is_exact_for_quadratic_null() {
        let t0 = 3.3;
        let v: Vec<f64> = (0..8)
            .map(|i| 1.0 / (0.01 + (i as f64 - t0).powi(2)))
            .collect();
        let p = find_peaks(&spec(v), &PeakOptions::default());
        assert!((p.peaks[0].theta_deg - t0).abs() < 1e-12);
    }

    #[test]
    fn order_rule() {
        assert_eq!(auto_order_range(Method::OneWimo, 40), (8, 24));
        assert_eq!(auto_order_range(Method::PWimo, 40), (20, 28));
        let c = select_order(OrderRule::Auto, Method::OneWimo, 40, 0, 3).unwrap();
        assert_eq!(c.p, 8);
        assert!(c.mdl_empty);
        let c = select_order(OrderRule::Auto, Method::OneWimo, 40, 30, 3).unwrap();
        assert_eq!(c.p, 24);
        assert!(matches!(
            select_order(OrderRule::Manual(40), Method::OneWimo, 40, 2, 3),
            Err(Error::OrderOutOfRange {
                min: 1,
                max: 39,
                ..
            })
        ));
    }

    #[test]
    fn full_noise_space_gives_flat_spectra() {
        let geom = ArrayGeometry::ula(4, 0.1, 1500.0).unwrap();
        let grid = angle_grid(-90.0, 90.0, 5.0).unwrap();
        let assumption = SpectrumAssumption::Uniform {
            fc: 3000.0,
            bandwidth: 2000.0,
        };
        let cache = ModalCache::build(&geom, &grid, 0.0, &assumption, 3, 1e-4).unwrap();
        let pi = NoiseProjector::new(CMatrix::identity(12), 0).unwrap();
        let one = spectrum_1wimo(&pi, &cache, 3).unwrap();
        assert!(one.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let pw = spectrum_pwimo(&pi, &cache, 3).unwrap();
        assert!(pw.values.iter().all(|v| (v - 1.0 / 12.0).abs() < 1e-14));
    }

    #[test]
    fn exact_subspace_gives_sharp_peak() {
        let geom = ArrayGeometry::ula(6, 1500.0 / 9000.0, 1500.0).unwrap();
        let (m, dt) = (3, 1e-4);
        let grid = angle_grid(-90.0, 90.0, 1.0).unwrap();
        let assumption = SpectrumAssumption::Uniform {
            fc: 3000.0,
            bandwidth: 3000.0,
        };
        let cache = ModalCache::build(&geom, &grid, 0.0, &assumption, m, dt).unwrap();
        let s = approx_stcm_uniform(&geom, deg_to_rad(20.0), 0.0, 3000.0, 3000.0, m, dt).unwrap();
        let eig = HermitianEigen::new(s.matrix()).unwrap();
        let p = modal_basis(&s).unwrap().rank(1e-10);
        let un = eig.vectors.column_block(p, 18);
        let pi = NoiseProjector::from_basis(&un);
        let spec = spectrum_1wimo(&pi, &cache, m).unwrap();
        let mut sorted = spec.values.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert_eq!(spec.grid_deg[spec.argmax()], 20.0);
        assert!(spec.values[spec.argmax()] / median > 1e3);
    }

    #[test]
    fn trace_identity_of_pwimo_denominator() {
        let geom = ArrayGeometry::ula(4, 0.12, 1500.0).unwrap();
        let s = approx_stcm_uniform(&geom, 0.4, 0.0, 3000.0, 2500.0, 3, 1e-4).unwrap();
        let basis = modal_basis(&s).unwrap();
        let other = approx_stcm_uniform(&geom, -0.2, 0.0, 3000.0, 2500.0, 3, 1e-4).unwrap();
        let eig = HermitianEigen::new(other.matrix()).unwrap();
        let un = eig.vectors.column_block(5, 12);
        let pi = NoiseProjector::from_basis(&un);
        let lhs = 1.0 / pwimo_value(&pi, s.matrix()).unwrap();
        let mut rhs = 0.0;
        for l in 0..12 {
            let ul = basis.vector(l);
            for k in 0..un.cols() {
                rhs += basis.sigma[l] * crate::linalg::dot(&un.column(k), &ul).norm_sqr();
            }
        }
        assert!((lhs - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn ss_transform_reductions() {
        let geom = ArrayGeometry::ula(5, 0.1, 1500.0).unwrap();
        let model = build_stacked_model(&geom, 0.5, 0.0, 3, 1e-4).unwrap();
        let g = model.g_vector(2500.0);
        let t = ss_transform(&g, &model, 2500.0).unwrap();
        assert!((t - C64::new(15.0, 0.0)).norm() < 1e-12);

        // m = 1: inner product with the steering vector
        let m1 = build_stacked_model(&geom, 0.5, 0.0, 1, 1e-4).unwrap();
        let y: Vec<C64> = (0..5).map(|k| C64::new(k as f64, 1.0)).collect();
        let a = steering_vector(&geom, 0.5, 0.0, 2000.0);
        let want = crate::linalg::dot(&a, &y);
        assert!((ss_transform(&y, &m1, 2000.0).unwrap() - want).norm() < 1e-12);

        // N_S = 1: a DFT sample
        let single = ArrayGeometry::new(alloc::vec![[0.0; 3]], 1500.0).unwrap();
        let model = build_stacked_model(&single, 0.0, 0.0, 8, 1.0 / 8000.0).unwrap();
        let y: Vec<C64> = (0..8)
            .map(|k| C64::new((k * k) as f64, -(k as f64)))
            .collect();
        let dft: C64 = y
            .iter()
            .enumerate()
            .map(|(n, v)| v * cis(-2.0 * PI * 3.0 * n as f64 / 8.0))
            .sum();
        assert!((ss_transform(&y, &model, 3000.0).unwrap() - dft).norm() < 1e-9);
    }

    #[test]
    fn identity_covariance_maps_are_flat() {
        let geom = ArrayGeometry::ula(3, 0.1, 1500.0).unwrap();
        let s = CMatrix::identity(6);
        let freqs = linspace(1000.0, 4000.0, 4);
        let thetas = angle_grid(-60.0, 60.0, 30.0).unwrap();
        let cbf = sf_map(&SfInput::Cbf(&s), &geom, 2, 1e-4, &freqs, &thetas, 0.0).unwrap();
        assert!(cbf.values.iter().all(|v| (v - 6.0).abs() < 1e-12));
        let solver = MvdrSolver::with_loading(&s, 0.0).unwrap();
        let mv = sf_map(
            &SfInput::Mvdr(&solver),
            &geom,
            2,
            1e-4,
            &freqs,
            &thetas,
            0.0,
        )
        .unwrap();
        assert!(mv.values.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-12));
    }

    #[test]
    fn operation_count_is_bandwidth_free() {
        let a = operation_count(Method::PWimo, 40, 8000, 181, 1);
        assert_eq!(a.spectrum, 8 * 1600 * 181);
        assert!(a.total() > a.spectrum);
    }
}
