//! Result files: spectrum and f-theta CSV, peak and diagnostics JSON.
//!
//! Floats are written in Rust's shortest round-trip form, so rereading a
//! file reproduces the computed values exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wimo_core::estimators::{FtMap, Peak, SpatialSpectrum};
use wimo_core::math::db;

use crate::error::{Result, WimoError};
use crate::pipeline::Estimate;

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => WimoError::io(path, io),
        other => WimoError::Format(format!("{other:?}")),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub theta_deg: f64,
    pub value_linear: f64,
    pub value_db: f64,
}

pub fn spectrum_rows(s: &SpatialSpectrum) -> Vec<SpectrumRow> {
    s.grid_deg
        .iter()
        .zip(&s.values)
        .map(|(t, v)| SpectrumRow {
            theta_deg: *t,
            value_linear: *v,
            value_db: db(*v),
        })
        .collect()
}

pub fn write_spectrum_csv(path: &Path, s: &SpatialSpectrum) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in spectrum_rows(s) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| WimoError::io(path, e))
}

pub fn read_spectrum_csv(path: &Path) -> Result<Vec<SpectrumRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<SpectrumRow>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtRow {
    pub freq_hz: f64,
    pub theta_deg: f64,
    pub value_linear: f64,
    pub value_db: f64,
}

pub fn write_ft_csv(path: &Path, map: &FtMap) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (fi, f) in map.freqs.iter().enumerate() {
        for (ti, t) in map.thetas_deg.iter().enumerate() {
            let v = map.at(fi, ti);
            w.serialize(FtRow {
                freq_hz: *f,
                theta_deg: *t,
                value_linear: v,
                value_db: db(v),
            })?;
        }
    }
    w.flush().map_err(|e| WimoError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub theta_deg: f64,
    pub height_db: f64,
    pub prominence_db: f64,
}

impl From<&Peak> for PeakRecord {
    fn from(p: &Peak) -> Self {
        Self {
            theta_deg: p.theta_deg,
            height_db: p.height_db,
            prominence_db: p.prominence_db,
        }
    }
}

/// Peaks plus the quantities that explain them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: String,
    pub m: usize,
    pub dim: usize,
    pub n_vectors: usize,
    /// `null` for methods without a subspace split.
    pub p: Option<usize>,
    pub p_mdl: Option<usize>,
    /// MDL found no source; `P` then falls back to its lower bound.
    pub mdl_empty: bool,
    pub eps_max_one: usize,
    pub decorrelation_ratio: f64,
    pub peaks: Vec<PeakRecord>,
    pub eigenvalues: Vec<f64>,
}

impl EstimateReport {
    pub fn new(est: &Estimate) -> Self {
        let d = &est.diagnostics;
        Self {
            method: est.spectrum.method.as_str().to_string(),
            m: est.spectrum.m,
            dim: d.dim,
            n_vectors: d.n_vectors,
            p: d.order.map(|o| o.p),
            p_mdl: d.order.map(|o| o.p_mdl),
            mdl_empty: d.order.is_some_and(|o| o.mdl_empty),
            eps_max_one: d.eps_max_one,
            decorrelation_ratio: d.decorrelation_ratio,
            peaks: est.peaks.peaks.iter().map(PeakRecord::from).collect(),
            eigenvalues: d.eigenvalues.clone(),
        }
    }
}
