//! Bandwidth ratios, peak-to-truth assignment, resolution and RMSE.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Maximum angle error (degrees) for a peak to count as resolving a source.
pub const RESOLUTION_MAX_ERROR_DEG: f64 = 1.0;
/// Minimum peak prominence (dB) for a peak to be counted.
pub const RESOLUTION_MIN_PROMINENCE_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthMetrics {
    /// `2 (f_h - f_l) / (f_h + f_l)`.
    pub eta: f64,
    /// `f_h / f_l`.
    pub gamma: f64,
}

pub fn bandwidth_metrics(f_lo: f64, f_hi: f64) -> Result<BandwidthMetrics> {
    if !(f_lo > 0.0) || !(f_hi >= f_lo) || !f_hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need 0 < f_l <= f_h, got f_l={f_lo}, f_h={f_hi}"
        )));
    }
    Ok(BandwidthMetrics {
        eta: 2.0 * (f_hi - f_lo) / (f_hi + f_lo),
        gamma: f_hi / f_lo,
    })
}

/// Lower band edge giving bandwidth ratio `eta` with `f_hi` fixed.
pub fn f_lo_for_eta(f_hi: f64, eta: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&eta) || !(f_hi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must lie in [0, 2) and f_h > 0, got eta={eta}"
        )));
    }
    Ok(f_hi * (2.0 - eta) / (2.0 + eta))
}

/// Greedy nearest assignment without replacement. Returns, per truth, the
/// signed error `estimate - truth` of its assigned estimate, if any. Ties in
/// distance go to the smaller truth angle, then the smaller estimate.
pub fn match_estimates(estimates: &[f64], truth: &[f64]) -> Vec<Option<f64>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(estimates.len() * truth.len());
    for (ti, t) in truth.iter().enumerate() {
        for (ei, e) in estimates.iter().enumerate() {
            pairs.push(((e - t).abs(), ti, ei));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(truth[a.1].total_cmp(&truth[b.1]))
            .then(estimates[a.2].total_cmp(&estimates[b.2]))
    });
    let mut out = alloc::vec![None; truth.len()];
    let mut used = alloc::vec![false; estimates.len()];
    for (_, ti, ei) in pairs {
        if out[ti].is_none() && !used[ei] {
            out[ti] = Some(estimates[ei] - truth[ti]);
            used[ei] = true;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub resolved: bool,
    /// Signed per-source errors in degrees (truth order).
    pub errors: Vec<Option<f64>>,
}

/// A trial is resolved when the number of counted peaks equals the number
/// of sources and every matched error is below `max_error_deg`. Callers pass
/// only peaks that already meet the prominence threshold.
pub fn resolve(peaks_deg: &[f64], truth_deg: &[f64], max_error_deg: f64) -> Resolution {
    let errors = match_estimates(peaks_deg, truth_deg);
    let resolved = peaks_deg.len() == truth_deg.len()
        && errors
            .iter()
            .all(|e| matches!(e, Some(v) if v.abs() < max_error_deg));
    Resolution { resolved, errors }
}

/// Root mean square of the pooled errors; `None` when there are none.
pub fn rmse<'a>(errors: impl IntoIterator<Item = &'a f64>) -> Option<f64> {
    let mut n = 0usize;
    let mut acc = 0.0;
    for e in errors {
        acc += e * e;
        n += 1;
    }
    (n > 0).then(|| libm::sqrt(acc / n as f64))
}

/// Standard error of a proportion estimated from `n` Bernoulli trials.
pub fn proportion_std(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    libm::sqrt((p * (1.0 - p)).max(0.0) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_examples() {
        let b = bandwidth_metrics(1500.0, 4500.0).unwrap();
        assert!((b.eta - 1.0).abs() < 1e-15 && (b.gamma - 3.0).abs() < 1e-15);
        let b = bandwidth_metrics(2000.0, 2000.0).unwrap();
        assert_eq!((b.eta, b.gamma), (0.0, 1.0));
        let b = bandwidth_metrics(400.0, 4000.0).unwrap();
        assert!((b.eta - 1.636_363_636_363_636_4).abs() < 1e-12);
        assert!((b.gamma - 10.0).abs() < 1e-12);
        assert!(bandwidth_metrics(0.0, 1.0).is_err());
        assert!(bandwidth_metrics(2.0, 1.0).is_err());
        let fl = f_lo_for_eta(4500.0, 1.0).unwrap();
        assert!((fl - 1500.0).abs() < 1e-9);
    }

    #[test]
    fn greedy_matching() {
        let e = match_estimates(&[24.6, 15.2], &[15.0, 25.0]);
        assert!((e[0].unwrap() - 0.2).abs() < 1e-12);
        assert!((e[1].unwrap() + 0.4).abs() < 1e-12);
        let e = match_estimates(&[10.0], &[9.0, 11.0]);
        assert_eq!(e, alloc::vec![Some(1.0), None]);
    }

    #[test]
    fn resolution_rule() {
        assert!(resolve(&[15.3, 24.8], &[15.0, 25.0], 1.0).resolved);
        assert!(!resolve(&[15.3], &[15.0, 25.0], 1.0).resolved);
        assert!(!resolve(&[15.3, 26.5], &[15.0, 25.0], 1.0).resolved);
        assert!(!resolve(&[15.0, 20.0, 25.0], &[15.0, 25.0], 1.0).resolved);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 0.0]), Some(0.0));
        assert_eq!(rmse(&[1.0, -1.0]), Some(1.0));
        assert_eq!(rmse(&[]), None);
    }
}
