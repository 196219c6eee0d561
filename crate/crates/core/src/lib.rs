//! Wideband modal orthogonality (WIMO) direction-of-arrival estimation.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the deterministic
//! part of the pipeline:
//!
//! - [`geometry`]: sensor delays, stacked spatial-temporal model vectors.
//! - [`stcm`]: stacking snapshots, the spatial-temporal covariance estimate,
//!   eigen-split into signal/noise subspaces and MDL order selection.
//! - [`approx`]: the closed-form (uniform PSD) and quadrature (arbitrary PSD)
//!   covariance approximation, its modal basis and the generalized steering
//!   vector, effective-dimension estimates and the large-bandwidth limit.
//! - [`estimators`]: 1-WIMO / p-WIMO spatial spectra, the SS-Transform,
//!   space-frequency maps (CBF, MVDR, MUSIC) and peak extraction.
//! - [`metrics`]: bandwidth ratios, peak-to-truth matching and RMSE.
//!
//! Signal synthesis, file formats and the Monte Carlo harness live in the
//! `wimo` companion crate.

#![no_std]
// Negated float comparisons are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod approx;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod psd;
pub mod stcm;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, StackedModel};
pub use linalg::{CMatrix, HermitianEigen};
pub use psd::{PsdShape, PsdSpec};
