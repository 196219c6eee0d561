//! Experiments that compare the approximate covariance model with simulated
//! data, plus the spectrum-stage timing probe.

use std::time::Instant;

use rayon::prelude::*;
use wimo_core::approx::{
    approx_stcm_uniform, bass_ale_bound, effective_dim, effective_dim_max, numerical_rank,
};
use wimo_core::estimators::{wimo_value, NoiseProjector};
use wimo_core::linalg::{CMatrix, HermitianEigen};
use wimo_core::math::deg_to_rad;
use wimo_core::stcm::SubspaceSplit;

use crate::config::{ExperimentSpec, PsdConfig};
use crate::error::Result;
use crate::pipeline::{estimate_stcm_parallel, Prepared};
use crate::seed::trial_seed;
use crate::simulator::simulate;

/// Noiseless `N_S = 8` ULA over `[f_lo, 4.5 kHz]`, `fs = 10 kHz`, unit-power
/// sources at `thetas_deg`, lag order `m`.
pub fn noiseless_spec(thetas_deg: &[f64], f_lo: f64, m: usize, snapshots: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec {
        sources: thetas_deg
            .iter()
            .map(|t| crate::config::SourceSpec {
                theta_deg: *t,
                phi_deg: 0.0,
                snr_db: 0.0,
                psd: PsdConfig::Uniform { f_lo, f_hi: 4500.0 },
            })
            .collect(),
        ..ExperimentSpec::default()
    };
    spec.sampling.noiseless = true;
    spec.sampling.snapshots = snapshots;
    spec.estimator.m = m;
    spec
}

/// `sum_k S̆(theta_k)` for the sources of `spec` with the uniform band model.
fn model_sum(spec: &ExperimentSpec) -> Result<CMatrix> {
    let geometry = spec.geometry()?;
    let [lo, hi] = spec.assumed_band();
    let mut sum: Option<CMatrix> = None;
    for s in &spec.sources {
        let power = spec.sampling.noise_power * 10f64.powf(s.snr_db / 10.0);
        let a = approx_stcm_uniform(
            &geometry,
            deg_to_rad(s.theta_deg),
            0.0,
            0.5 * (lo + hi),
            hi - lo,
            spec.estimator.m,
            spec.dt(),
        )?;
        let term = a.matrix().scaled(power);
        sum = Some(match sum {
            Some(acc) => acc.add(&term),
            None => term,
        });
    }
    Ok(sum.expect("at least one source"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenMatchReport {
    pub model: Vec<f64>,
    pub empirical_mean: Vec<f64>,
    /// Relative error for every model eigenvalue above `floor * sigma_1`.
    pub compared: Vec<(usize, f64)>,
}

impl EigenMatchReport {
    pub fn max_relative_error(&self) -> f64 {
        self.compared.iter().map(|c| c.1).fold(0.0, f64::max)
    }
}

/// Model eigenvalues `sum_k sigma_k^2 S̆(theta_k)` against the mean sample
/// STCM eigenvalues over `seeds` noiseless realizations.
pub fn eigen_match(spec: &ExperimentSpec, seeds: usize, floor: f64) -> Result<EigenMatchReport> {
    let model = HermitianEigen::new(&model_sum(spec)?)?.values;
    let scenario = spec.scenario(0.0)?;
    let runs = (0..seeds)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let snap = simulate(&scenario, trial_seed(spec.sampling.seed, i as u64))?;
            Ok(estimate_stcm_parallel(&snap, spec.estimator.m)?
                .eigen()?
                .values)
        })
        .collect::<Result<Vec<_>>>()?;
    let l = model.len();
    let empirical_mean: Vec<f64> = (0..l)
        .map(|k| runs.iter().map(|r| r[k]).sum::<f64>() / seeds.max(1) as f64)
        .collect();
    let compared = model
        .iter()
        .zip(&empirical_mean)
        .enumerate()
        .filter(|(_, (m, _))| **m > floor * model[0])
        .map(|(i, (m, e))| (i, (e - m).abs() / m))
        .collect();
    Ok(EigenMatchReport {
        model,
        empirical_mean,
        compared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub eta: f64,
    /// `eps_hat^(K)`: rank of the summed model.
    pub eps_hat: usize,
    /// `eps_hat_max^(K) = K * rank(S̆(90 deg))`.
    pub eps_max: usize,
    /// `K (m + N_S)`.
    pub bound: usize,
    /// Numerical rank of one noiseless sample STCM.
    pub empirical: usize,
}

/// Effective-dimension estimates against the noiseless sample rank, all at
/// the same relative threshold.
pub fn rank_comparison(spec: &ExperimentSpec, seed: u64) -> Result<RankReport> {
    let geometry = spec.geometry()?;
    let [lo, hi] = spec.assumed_band();
    let (fc, b, m, dt, tol) = (
        0.5 * (lo + hi),
        hi - lo,
        spec.estimator.m,
        spec.dt(),
        spec.estimator.rank_tol,
    );
    let thetas: Vec<f64> = spec
        .sources
        .iter()
        .map(|s| deg_to_rad(s.theta_deg))
        .collect();
    let k = thetas.len();
    let snap = simulate(&spec.scenario(0.0)?, seed)?;
    let sample = estimate_stcm_parallel(&snap, m)?.eigen()?.values;
    Ok(RankReport {
        eta: wimo_core::metrics::bandwidth_metrics(lo, hi)?.eta,
        eps_hat: effective_dim(&geometry, &thetas, 0.0, fc, b, m, dt, tol)?,
        eps_max: effective_dim_max(&geometry, k, fc, b, m, dt, tol)?,
        bound: bass_ale_bound(k, m, geometry.n_sensors())?,
        empirical: numerical_rank(&sample, tol),
    })
}

/// One WIMO spectrum evaluation, timed: the modal cache and the noise
/// subspace of one simulated block are fixed up front.
pub struct SpectrumProbe {
    prep: Prepared,
    pi: NoiseProjector,
}

impl SpectrumProbe {
    pub fn new(spec: &ExperimentSpec, p: usize) -> Result<Self> {
        let prep = Prepared::new(spec, None)?;
        if prep.cache.is_none() {
            return Err(crate::error::WimoError::Config(
                "spectrum probe needs a WIMO method".into(),
            ));
        }
        let snap = simulate(&spec.scenario(0.0)?, spec.sampling.seed)?;
        let eig = estimate_stcm_parallel(&snap, spec.estimator.m)?.eigen()?;
        let pi = NoiseProjector::from_split(&SubspaceSplit::from_eigen(eig, p)?);
        Ok(Self { prep, pi })
    }

    /// Wall time of one serial pass over the grid.
    pub fn time_once(&self) -> Result<f64> {
        let cache = self.prep.cache.as_ref().expect("checked in new");
        let t0 = Instant::now();
        let mut sink = 0.0;
        for e in cache.entries() {
            sink += wimo_value(self.prep.method, &self.pi, e)?;
        }
        let secs = t0.elapsed().as_secs_f64();
        std::hint::black_box(sink);
        Ok(secs)
    }
}

/// Median spectrum time of each probe over `reps` interleaved rounds, so
/// that drift in machine load affects all probes alike.
pub fn interleaved_medians(probes: &[SpectrumProbe], reps: usize) -> Result<Vec<f64>> {
    for p in probes {
        p.time_once()?;
    }
    let mut times = vec![Vec::with_capacity(reps); probes.len()];
    for _ in 0..reps {
        for (p, t) in probes.iter().zip(&mut times) {
            t.push(p.time_once()?);
        }
    }
    Ok(times
        .into_iter()
        .map(|mut t| {
            t.sort_by(f64::total_cmp);
            t[t.len() / 2]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_source_eigenvalues_track_the_model() {
        let spec = noiseless_spec(&[40.0], 1500.0, 3, 2048);
        let r = eigen_match(&spec, 4, 0.01).unwrap();
        assert!(!r.compared.is_empty());
        assert!(r.max_relative_error() < 0.25, "{:?}", r.compared);
        let total: f64 = r.model.iter().sum();
        assert!((total - 24.0).abs() < 1e-9);
    }

    #[test]
    fn rank_estimates_are_ordered() {
        let spec = noiseless_spec(&[40.0, 60.0], 1500.0, 5, 2048);
        let r = rank_comparison(&spec, 5).unwrap();
        assert!(r.eps_hat <= r.eps_max && r.eps_max <= r.bound, "{r:?}");
        assert_eq!(r.bound, 26);
        assert!((r.eta - 1.0).abs() < 1e-12);
    }
}
