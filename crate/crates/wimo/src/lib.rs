//! Simulation, file formats, experiment pipeline and benchmarking built on
//! `wimo-core`.
//!
//! ```
//! use wimo::pipeline::{estimate, Prepared};
//! use wimo::simulator::simulate;
//! use wimo::ExperimentSpec;
//!
//! let spec = ExperimentSpec::default()
//!     .with_overrides(&["sources.0.theta_deg=-10", "sources.1.theta_deg=30"])?;
//! let snap = simulate(&spec.scenario(0.0)?, spec.sampling.seed)?;
//! let est = estimate(&Prepared::new(&spec, None)?, &snap)?;
//! let angles = est.peaks.angles();
//! assert!(angles.iter().any(|a| (a + 10.0).abs() < 1.0));
//! assert!(angles.iter().any(|a| (a - 30.0).abs() < 1.0));
//! # Ok::<(), wimo::WimoError>(())
//! ```

// Negated float comparisons are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod output;
pub mod pipeline;
pub mod seed;
pub mod simulator;
pub mod theory;

pub use config::ExperimentSpec;
pub use error::{Result, WimoError};
