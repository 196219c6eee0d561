//! End-to-end estimation: snapshots to covariance, order, spectrum and peaks.
//!
//! Every parallel stage produces the same bits for any thread count. The
//! covariance is reduced over fixed chunks in a fixed tree, and the grid
//! stages are order-preserving maps.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use wimo_core::approx::{
    decorrelation_ratio, effective_dim_max, ModalCache, ModalEntry, SpectrumAssumption,
};
use wimo_core::estimators::{
    find_peaks, grid_models, select_order, sf_row, wimo_value, FtMap, Method, MvdrSolver,
    NoiseProjector, OrderChoice, PeakOptions, PeakSet, SfInput, SpatialSpectrum,
};
use wimo_core::stcm::{
    chunk_count, finish_stcm, mdl_order, partial_sum, reduce_partials, SnapshotMatrix,
    StcmEstimate, SubspaceSplit,
};
use wimo_core::{ArrayGeometry, HermitianEigen};

use crate::config::ExperimentSpec;
use crate::error::{Result, WimoError};
use crate::io::{cache_key_hash, read_modal_cache, write_modal_cache};

/// Sample STCM with the chunk partial sums computed in parallel.
pub fn estimate_stcm_parallel(snap: &SnapshotMatrix, m: usize) -> Result<StcmEstimate> {
    let chunks = chunk_count(snap, m)?;
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| partial_sum(snap, m, c))
        .collect::<wimo_core::Result<Vec<_>>>()?;
    Ok(finish_stcm(snap, m, reduce_partials(parts))?)
}

pub fn build_modal_cache(
    geometry: &ArrayGeometry,
    grid_deg: &[f64],
    assumption: &SpectrumAssumption,
    m: usize,
    dt: f64,
) -> Result<ModalCache> {
    let entries = grid_deg
        .par_iter()
        .map(|&t| ModalEntry::compute(geometry, t, 0.0, assumption, m, dt))
        .collect::<wimo_core::Result<Vec<_>>>()?;
    Ok(ModalCache::from_entries(entries)?)
}

/// Modal cache for `spec`, reused from `file` when it was built for the same
/// geometry, assumption, lag order and grid, and written there otherwise.
pub fn modal_cache_for(spec: &ExperimentSpec, file: Option<&Path>) -> Result<ModalCache> {
    let key = cache_key_hash(&spec.cache_key()?);
    if let Some(path) = file {
        if let Some(cache) = read_modal_cache(path, &key)? {
            return Ok(cache);
        }
    }
    let cache = build_modal_cache(
        &spec.geometry()?,
        &spec.grid()?,
        &spec.assumption(),
        spec.estimator.m,
        spec.dt(),
    )?;
    if let Some(path) = file {
        write_modal_cache(path, &cache, &key)?;
    }
    Ok(cache)
}

/// Everything about an experiment that does not depend on the data.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ExperimentSpec,
    pub method: Method,
    pub geometry: ArrayGeometry,
    pub grid_deg: Vec<f64>,
    /// Present for the WIMO methods.
    pub cache: Option<ModalCache>,
    /// Single-source effective dimension at endfire, for the order rule.
    pub eps_max_one: usize,
}

impl Prepared {
    pub fn new(spec: &ExperimentSpec, cache_file: Option<&Path>) -> Result<Self> {
        spec.validate()?;
        let method = spec.method();
        let geometry = spec.geometry()?;
        let assumption = spec.assumption();
        let eps_max_one = effective_dim_max(
            &geometry,
            1,
            assumption.center(),
            assumption.bandwidth(),
            spec.estimator.m,
            spec.dt(),
            spec.estimator.rank_tol,
        )?;
        let cache = match method {
            Method::OneWimo | Method::PWimo => Some(modal_cache_for(spec, cache_file)?),
            _ => None,
        };
        Ok(Self {
            spec: spec.clone(),
            method,
            geometry,
            grid_deg: spec.grid()?,
            cache,
            eps_max_one,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.estimator.m * self.geometry.n_sensors()
    }

    pub fn peak_options(&self) -> PeakOptions {
        PeakOptions {
            min_prominence_db: self.spec.estimator.min_prominence_db,
            max_count: None,
            refine: self.spec.estimator.refine_peaks,
        }
    }
}

/// Quantities reported alongside every estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub dim: usize,
    pub n_vectors: usize,
    pub eigenvalues: Vec<f64>,
    /// Absent for methods without a subspace split.
    pub order: Option<OrderChoice>,
    pub eps_max_one: usize,
    /// `m B / fs` for the assumed band.
    pub decorrelation_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub spectrum: SpatialSpectrum,
    pub peaks: PeakSet,
    pub diagnostics: Diagnostics,
    /// The f-theta map the spectrum was collapsed from (SF methods).
    pub ft_map: Option<FtMap>,
    /// Wall time of the spectrum stage alone. Never written to result files.
    pub spectrum_seconds: f64,
}

fn wimo_spectrum(prep: &Prepared, pi: &NoiseProjector) -> Result<SpatialSpectrum> {
    let cache = prep
        .cache
        .as_ref()
        .ok_or_else(|| WimoError::Config("modal cache missing".into()))?;
    let values = cache
        .entries()
        .par_iter()
        .map(|e| wimo_value(prep.method, pi, e))
        .collect::<wimo_core::Result<Vec<_>>>()?;
    Ok(SpatialSpectrum::new(
        cache.grid_deg(),
        values,
        prep.method,
        prep.spec.estimator.m,
        Some(pi.p()),
    )?)
}

/// Space-frequency map, parallel over frequency rows.
pub fn ft_map(prep: &Prepared, input: &SfInput<'_>) -> Result<FtMap> {
    let spec = &prep.spec;
    let freqs = spec.freqs();
    let models = grid_models(
        &prep.geometry,
        &prep.grid_deg,
        0.0,
        spec.estimator.m,
        spec.dt(),
    )?;
    let rows = freqs
        .par_iter()
        .map(|&f| sf_row(input, &models, f))
        .collect::<wimo_core::Result<Vec<_>>>()?;
    Ok(FtMap {
        method: input.method(),
        freqs,
        thetas_deg: prep.grid_deg.clone(),
        values: rows.concat(),
    })
}

/// Runs the configured estimator on one snapshot block.
pub fn estimate(prep: &Prepared, snap: &SnapshotMatrix) -> Result<Estimate> {
    let spec = &prep.spec;
    let m = spec.estimator.m;
    if snap.n_sensors() != prep.geometry.n_sensors() {
        return Err(WimoError::Config(format!(
            "data has {} sensors but the array has {}",
            snap.n_sensors(),
            prep.geometry.n_sensors()
        )));
    }
    if (snap.fs() - spec.sampling.fs).abs() > 1e-9 * spec.sampling.fs {
        return Err(WimoError::Config(format!(
            "data sampled at {} Hz but sampling.fs is {}",
            snap.fs(),
            spec.sampling.fs
        )));
    }
    let stcm = estimate_stcm_parallel(snap, m)?;
    let l = stcm.dim();
    let eig = stcm.eigen()?;
    let eigenvalues = eig.values.clone();
    let needs_order = prep.method.needs_order();
    let order = if needs_order {
        let p_mdl = mdl_order(&eig.values, stcm.n_vectors())?;
        Some(select_order(
            spec.order_rule(),
            prep.method,
            l,
            p_mdl,
            prep.eps_max_one,
        )?)
    } else {
        None
    };
    let t0 = Instant::now();
    let (spectrum, ft) = match prep.method {
        Method::OneWimo | Method::PWimo => {
            let split = split(eig, order)?;
            (
                wimo_spectrum(prep, &NoiseProjector::from_split(&split))?,
                None,
            )
        }
        Method::SfCbf => collapse(prep, &SfInput::Cbf(stcm.matrix()), None)?,
        Method::SfMvdr => {
            let solver = MvdrSolver::new(stcm.matrix())?;
            collapse(prep, &SfInput::Mvdr(&solver), None)?
        }
        Method::SfMusic => {
            let split = split(eig, order)?;
            let pi = NoiseProjector::from_split(&split);
            collapse(prep, &SfInput::Music(&pi), Some(split.p()))?
        }
    };
    let spectrum_seconds = t0.elapsed().as_secs_f64();
    let peaks = find_peaks(&spectrum, &prep.peak_options());
    let assumption = spec.assumption();
    Ok(Estimate {
        spectrum,
        peaks,
        diagnostics: Diagnostics {
            dim: l,
            n_vectors: stcm.n_vectors(),
            eigenvalues,
            order,
            eps_max_one: prep.eps_max_one,
            decorrelation_ratio: decorrelation_ratio(m, assumption.bandwidth(), spec.sampling.fs),
        },
        ft_map: ft,
        spectrum_seconds,
    })
}

fn split(eig: HermitianEigen, order: Option<OrderChoice>) -> Result<SubspaceSplit> {
    let p = order
        .map(|o| o.p)
        .ok_or_else(|| WimoError::Config("order not selected".into()))?;
    Ok(SubspaceSplit::from_eigen(eig, p)?)
}

fn collapse(
    prep: &Prepared,
    input: &SfInput<'_>,
    p: Option<usize>,
) -> Result<(SpatialSpectrum, Option<FtMap>)> {
    let map = ft_map(prep, input)?;
    let values = map.collapse_frequency();
    let spectrum = SpatialSpectrum::new(
        prep.grid_deg.clone(),
        values,
        prep.method,
        prep.spec.estimator.m,
        p,
    )?;
    Ok((spectrum, Some(map)))
}
