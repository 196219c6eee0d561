use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidGeometry(String),
    InvalidParameter(String),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// Signal-subspace order outside `[1, L-1]`.
    OrderOutOfRange {
        p: usize,
        min: usize,
        max: usize,
    },
    NotEnoughSnapshots {
        snapshots: usize,
        lag_order: usize,
    },
    NegativeDensity {
        frequency: f64,
        density: f64,
    },
    SingularMatrix,
    EmptyInput(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGeometry(msg) => write!(f, "invalid array geometry: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::OrderOutOfRange { p, min, max } => {
                write!(
                    f,
                    "signal subspace order P={p} outside valid range [{min}, {max}]"
                )
            }
            Error::NotEnoughSnapshots {
                snapshots,
                lag_order,
            } => write!(
                f,
                "{snapshots} snapshots cannot form stacked vectors of temporal order m={lag_order}"
            ),
            Error::NegativeDensity { frequency, density } => {
                write!(f, "negative PSD density {density} at {frequency} Hz")
            }
            Error::SingularMatrix => write!(f, "matrix is singular or not positive definite"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
        }
    }
}

impl core::error::Error for Error {}
