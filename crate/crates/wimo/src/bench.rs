//! Monte Carlo resolution and RMSE over a parameter sweep.
//!
//! Trial `i` of every sweep point uses seed `trial_seed(base, i)`, so the
//! points share random draws and differ only in the swept parameter. Trials
//! run in parallel and are collected in index order; results depend only on
//! the config, never on the thread count. Wall-clock timing is reported
//! separately from the results.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wimo_core::metrics::{proportion_std, resolve, rmse, RESOLUTION_MAX_ERROR_DEG};

use crate::config::{ExperimentSpec, SweepAxis};
use crate::error::{Result, WimoError};
use crate::pipeline::{estimate, Prepared};
use crate::seed::{stream_seed, trial_seed};
use crate::simulator::simulate;

const JITTER_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub point: usize,
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub jitter_deg: f64,
    pub resolved: bool,
    pub n_peaks: usize,
    pub p: Option<usize>,
    pub p_mdl: Option<usize>,
    pub mdl_empty: bool,
    /// Highest peaks first, `;`-separated.
    pub estimates_deg: String,
    /// Signed error per true source in source order, empty when unmatched.
    pub errors_deg: String,
    /// Error message when the trial could not be evaluated; empty otherwise.
    pub failure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub sweep_value: Option<f64>,
    pub trials: usize,
    /// No trials were run; every statistic below is null.
    pub empty: bool,
    pub resolved: usize,
    pub resolution_probability: Option<f64>,
    pub resolution_std: Option<f64>,
    /// Over resolved trials only; null when none resolved.
    pub rmse_resolved_deg: Option<f64>,
    pub mean_p: Option<f64>,
    pub mdl_empty_count: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub method: String,
    pub sweep_axis: Option<SweepAxis>,
    pub max_error_deg: f64,
    pub points: Vec<PointSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTiming {
    pub total_s: f64,
    pub point_s: Vec<f64>,
    /// Mean wall time of one spectrum evaluation per point; null without trials.
    pub mean_spectrum_s: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub trials: Vec<TrialRecord>,
    pub summary: BenchSummary,
    pub timing: BenchTiming,
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(";")
}

/// Common DOA offset of trial `trial_seed`, uniform in `[-jitter, jitter]`.
pub fn trial_jitter(trial_seed: u64, jitter_deg: f64) -> f64 {
    if jitter_deg == 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(trial_seed, JITTER_STREAM));
    rng.random_range(-jitter_deg..=jitter_deg)
}

/// One Monte Carlo trial and the wall time of its spectrum stage. A trial
/// that fails records the error and counts as unresolved.
pub fn run_trial(
    prep: &Prepared,
    point: usize,
    sweep_value: Option<f64>,
    trial: usize,
) -> (TrialRecord, Option<f64>) {
    let spec = &prep.spec;
    let seed = trial_seed(spec.sampling.seed, trial as u64);
    let jitter = trial_jitter(seed, spec.jitter_deg);
    let mut record = TrialRecord {
        point,
        sweep_value,
        trial,
        seed,
        jitter_deg: jitter,
        resolved: false,
        n_peaks: 0,
        p: None,
        p_mdl: None,
        mdl_empty: false,
        estimates_deg: String::new(),
        errors_deg: String::new(),
        failure: String::new(),
    };
    let est = match spec
        .scenario(jitter)
        .and_then(|sc| simulate(&sc, seed))
        .and_then(|snap| estimate(prep, &snap))
    {
        Ok(est) => est,
        Err(e) => {
            record.failure = e.to_string();
            return (record, None);
        }
    };
    let truth: Vec<f64> = spec.truth_deg().iter().map(|t| t + jitter).collect();
    let angles = est.peaks.angles();
    let res = resolve(&angles, &truth, RESOLUTION_MAX_ERROR_DEG);
    let order = est.diagnostics.order;
    record.resolved = res.resolved;
    record.n_peaks = angles.len();
    record.p = order.map(|o| o.p);
    record.p_mdl = order.map(|o| o.p_mdl);
    record.mdl_empty = order.is_some_and(|o| o.mdl_empty);
    record.estimates_deg = join(angles.iter().map(|a| a.to_string()));
    record.errors_deg = join(
        res.errors
            .iter()
            .map(|e| e.map_or(String::new(), |e| e.to_string())),
    );
    (record, Some(est.spectrum_seconds))
}

fn parse_errors(s: &str) -> Vec<f64> {
    s.split(';').filter_map(|e| e.parse().ok()).collect()
}

pub fn summarize(sweep_value: Option<f64>, records: &[TrialRecord]) -> PointSummary {
    let n = records.len();
    if n == 0 {
        return PointSummary {
            sweep_value,
            trials: 0,
            empty: true,
            resolved: 0,
            resolution_probability: None,
            resolution_std: None,
            rmse_resolved_deg: None,
            mean_p: None,
            mdl_empty_count: 0,
            failed: 0,
        };
    }
    let resolved: Vec<&TrialRecord> = records.iter().filter(|r| r.resolved).collect();
    let prob = resolved.len() as f64 / n as f64;
    let errors: Vec<f64> = resolved
        .iter()
        .flat_map(|r| parse_errors(&r.errors_deg))
        .collect();
    let ps: Vec<f64> = records
        .iter()
        .filter_map(|r| r.p.map(|p| p as f64))
        .collect();
    PointSummary {
        sweep_value,
        trials: n,
        empty: false,
        resolved: resolved.len(),
        resolution_probability: Some(prob),
        resolution_std: Some(proportion_std(prob, n)),
        rmse_resolved_deg: rmse(&errors),
        mean_p: (!ps.is_empty()).then(|| ps.iter().sum::<f64>() / ps.len() as f64),
        mdl_empty_count: records.iter().filter(|r| r.mdl_empty).count(),
        failed: records.iter().filter(|r| !r.failure.is_empty()).count(),
    }
}

/// Sweep points as `(value, spec at that value)`; a single unswept point
/// when no axis is set.
pub fn sweep_points(spec: &ExperimentSpec) -> Result<Vec<(Option<f64>, ExperimentSpec)>> {
    match spec.sweep.axis {
        None => Ok(vec![(None, spec.clone())]),
        Some(axis) => spec
            .sweep
            .values
            .iter()
            .map(|&v| Ok((Some(v), spec.at_sweep_value(axis, v)?)))
            .collect(),
    }
}

pub fn run_bench(spec: &ExperimentSpec, cache_dir: Option<&Path>) -> Result<BenchResult> {
    spec.validate()?;
    let start = Instant::now();
    let mut trials = Vec::new();
    let mut points = Vec::new();
    let mut point_s = Vec::new();
    let mut mean_spectrum_s = Vec::new();
    for (i, (value, point_spec)) in sweep_points(spec)?.into_iter().enumerate() {
        let t0 = Instant::now();
        let cache_file = cache_dir.map(|d| d.join(format!("modal-{i}.bin")));
        let prep = Prepared::new(&point_spec, cache_file.as_deref())?;
        let (records, times): (Vec<_>, Vec<_>) = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial(&prep, i, value, t))
            .unzip();
        let times: Vec<f64> = times.into_iter().flatten().collect();
        mean_spectrum_s
            .push((!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64));
        points.push(summarize(value, &records));
        trials.extend(records);
        point_s.push(t0.elapsed().as_secs_f64());
    }
    Ok(BenchResult {
        trials,
        summary: BenchSummary {
            method: spec.method().as_str().to_string(),
            sweep_axis: spec.sweep.axis,
            max_error_deg: RESOLUTION_MAX_ERROR_DEG,
            points,
        },
        timing: BenchTiming {
            total_s: start.elapsed().as_secs_f64(),
            point_s,
            mean_spectrum_s,
        },
    })
}

pub fn write_trials_csv(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if trials.is_empty() {
        // header only
        w.write_record([
            "point",
            "sweep_value",
            "trial",
            "seed",
            "jitter_deg",
            "resolved",
            "n_peaks",
            "p",
            "p_mdl",
            "mdl_empty",
            "estimates_deg",
            "errors_deg",
            "failure",
        ])?;
    }
    for t in trials {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| WimoError::io(path, e))
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<TrialRecord>, _>>()?)
}

/// Violations of the `check` assertions; empty when all hold.
pub fn check_summary(spec: &ExperimentSpec, summary: &BenchSummary) -> Vec<String> {
    let mut failures = Vec::new();
    let label = |p: &PointSummary| {
        p.sweep_value
            .map_or("point".to_string(), |v| format!("point {v}"))
    };
    for p in &summary.points {
        if p.empty {
            if spec.check.min_resolution.is_some() || spec.check.max_rmse_deg.is_some() {
                failures.push(format!("{}: no trials to check", label(p)));
            }
            continue;
        }
        if let (Some(min), Some(prob)) = (spec.check.min_resolution, p.resolution_probability) {
            if prob < min {
                failures.push(format!(
                    "{}: resolution probability {prob} < {min}",
                    label(p)
                ));
            }
        }
        if let Some(max) = spec.check.max_rmse_deg {
            match p.rmse_resolved_deg {
                Some(r) if r <= max => {}
                Some(r) => failures.push(format!("{}: RMSE {r} deg > {max} deg", label(p))),
                None => failures.push(format!("{}: RMSE undefined (no resolved trial)", label(p))),
            }
        }
    }
    if spec.check.nondecreasing_resolution {
        for w in summary.points.windows(2) {
            if let (Some(a), Some(b), Some(sa), Some(sb)) = (
                w[0].resolution_probability,
                w[1].resolution_probability,
                w[0].resolution_std,
                w[1].resolution_std,
            ) {
                let slack = (sa * sa + sb * sb).sqrt();
                if b < a - slack {
                    failures.push(format!(
                        "{}: resolution probability drops from {a} to {b} (more than one MC std {slack})",
                        label(&w[1])
                    ));
                }
            }
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentSpec {
        ExperimentSpec::default()
            .with_overrides(&[
                "sampling.snapshots=1024",
                "estimator.grid.start_deg=0",
                "estimator.grid.stop_deg=40",
                "estimator.grid.step_deg=0.5",
                "trials=4",
            ])
            .unwrap()
    }

    #[test]
    fn zero_trials_give_explicit_empty_points() {
        let spec = quick()
            .with_overrides(&["trials=0", r#"sweep.axis="snr""#, "sweep.values=[0, 10]"])
            .unwrap();
        let res = run_bench(&spec, None).unwrap();
        assert!(res.trials.is_empty());
        assert_eq!(res.summary.points.len(), 2);
        assert!(res
            .summary
            .points
            .iter()
            .all(|p| p.empty && p.resolution_probability.is_none()));
        let json = serde_json::to_value(&res.summary).unwrap();
        assert!(json["points"][0]["rmse_resolved_deg"].is_null());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trials_csv(&path, &res.trials).unwrap();
        assert!(read_trials_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn trials_csv_round_trips_and_summary_matches() {
        let res = run_bench(&quick(), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trials_csv(&path, &res.trials).unwrap();
        let back = read_trials_csv(&path).unwrap();
        assert_eq!(back, res.trials);
        assert_eq!(summarize(None, &back), res.summary.points[0]);
        assert_eq!(res.summary.points[0].resolved, 4, "{:?}", res.trials);
    }

    #[test]
    fn jitter_is_bounded_and_seeded() {
        let a = trial_jitter(7, 0.5);
        assert_eq!(a, trial_jitter(7, 0.5));
        assert!(a.abs() <= 0.5);
        assert_ne!(a, trial_jitter(8, 0.5));
        assert_eq!(trial_jitter(7, 0.0), 0.0);
    }

    #[test]
    fn unresolved_summary_has_null_rmse() {
        let rec = TrialRecord {
            point: 0,
            sweep_value: None,
            trial: 0,
            seed: 1,
            jitter_deg: 0.0,
            resolved: false,
            n_peaks: 1,
            p: Some(3),
            p_mdl: Some(0),
            mdl_empty: true,
            estimates_deg: "20".into(),
            errors_deg: "5;".into(),
            failure: String::new(),
        };
        let s = summarize(Some(1.0), &[rec]);
        assert_eq!(s.resolution_probability, Some(0.0));
        assert_eq!(s.rmse_resolved_deg, None);
        assert_eq!(s.mdl_empty_count, 1);
    }

    #[test]
    fn check_reports_violations() {
        let mut spec = quick();
        spec.check.min_resolution = Some(0.9);
        spec.check.nondecreasing_resolution = true;
        let point = |v: f64, p: f64| PointSummary {
            sweep_value: Some(v),
            trials: 100,
            empty: false,
            resolved: (p * 100.0) as usize,
            resolution_probability: Some(p),
            resolution_std: Some(proportion_std(p, 100)),
            rmse_resolved_deg: Some(0.1),
            mean_p: None,
            mdl_empty_count: 0,
            failed: 0,
        };
        let summary = BenchSummary {
            method: "1-wimo".into(),
            sweep_axis: Some(SweepAxis::Snr),
            max_error_deg: 1.0,
            points: vec![point(0.0, 0.95), point(1.0, 0.5)],
        };
        let failures = check_summary(&spec, &summary);
        assert_eq!(failures.len(), 2, "{failures:?}");
    }
}
