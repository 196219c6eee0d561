//! Source power spectral densities.
//!
//! A [`PsdShape`] is an unnormalized density over a finite support; the
//! [`PsdSpec`] adds the total power `sigma_x^2`. Signals are analytic, so the
//! support lies on positive frequencies.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sinc;

/// Half-power point of `sinc^2`: `sinc(x)^2 = 1/2` at `x = SINC2_HALF_POWER`.
pub const SINC2_HALF_POWER: f64 = 0.442_946_470_689_452_3;

/// `2 * sqrt(2 ln 2)`: full width at half maximum over the Gaussian sigma.
const GAUSS_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, PartialEq)]
pub enum PsdShape {
    /// Flat over `[f_lo, f_hi]`.
    Uniform { f_lo: f64, f_hi: f64 },
    /// `exp(-(f - fc)^2 / (2 s^2))` with `s` set from the 3 dB bandwidth,
    /// truncated to `band`.
    Gaussian {
        fc: f64,
        bw3db: f64,
        band: (f64, f64),
    },
    /// `sinc^2((f - fc) / T)` whose main lobe is `bw3db` wide at half power,
    /// truncated to `band`.
    Sinc2 {
        fc: f64,
        bw3db: f64,
        band: (f64, f64),
    },
    /// Piecewise-linear density through `(frequency, density)` points sorted
    /// by frequency. A single point is a spectral line.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdSpec {
    pub shape: PsdShape,
    /// Total power (variance) of the source.
    pub power: f64,
}

impl PsdShape {
    pub fn uniform(f_lo: f64, f_hi: f64) -> Self {
        PsdShape::Uniform { f_lo, f_hi }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(Error::InvalidParameter(format!(
                "PSD support [{lo}, {hi}] is not an interval"
            )));
        }
        match self {
            PsdShape::Uniform { f_lo, f_hi } => {
                if f_hi < f_lo {
                    return Err(Error::InvalidParameter(
                        "uniform PSD needs f_lo <= f_hi".into(),
                    ));
                }
            }
            PsdShape::Gaussian { bw3db, band, .. } | PsdShape::Sinc2 { bw3db, band, .. } => {
                if !(*bw3db > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "3 dB bandwidth must be positive, got {bw3db}"
                    )));
                }
                if !(band.1 > band.0) {
                    return Err(Error::InvalidParameter(
                        "PSD band must have f_hi > f_lo".into(),
                    ));
                }
            }
            PsdShape::Tabulated(points) => {
                if points.is_empty() {
                    return Err(Error::EmptyInput("tabulated PSD"));
                }
                for &(f, d) in points {
                    if !(d >= 0.0) {
                        return Err(Error::NegativeDensity {
                            frequency: f,
                            density: d,
                        });
                    }
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::InvalidParameter(
                        "tabulated PSD frequencies must increase strictly".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Frequency interval outside which the density is zero.
    pub fn support(&self) -> (f64, f64) {
        match self {
            PsdShape::Uniform { f_lo, f_hi } => (*f_lo, *f_hi),
            PsdShape::Gaussian { band, .. } | PsdShape::Sinc2 { band, .. } => *band,
            PsdShape::Tabulated(points) => {
                let lo = points.first().map_or(0.0, |p| p.0);
                let hi = points.last().map_or(0.0, |p| p.0);
                (lo, hi)
            }
        }
    }

    /// Frequency of a pure spectral line (zero-width uniform band or
    /// single-point table).
    pub fn line_frequency(&self) -> Option<f64> {
        match self {
            PsdShape::Uniform { f_lo, f_hi } if f_lo == f_hi => Some(*f_lo),
            PsdShape::Tabulated(points) if points.len() == 1 => Some(points[0].0),
            _ => None,
        }
    }

    /// Unnormalized density; zero outside [`Self::support`].
    pub fn density(&self, f: f64) -> f64 {
        let (lo, hi) = self.support();
        if f < lo || f > hi {
            return 0.0;
        }
        match self {
            PsdShape::Uniform { .. } => 1.0,
            PsdShape::Gaussian { fc, bw3db, .. } => {
                let s = bw3db / GAUSS_FWHM_PER_SIGMA;
                let x = (f - fc) / s;
                libm::exp(-0.5 * x * x)
            }
            PsdShape::Sinc2 { fc, bw3db, .. } => {
                let t = bw3db / (2.0 * SINC2_HALF_POWER);
                let v = sinc((f - fc) / t);
                v * v
            }
            PsdShape::Tabulated(points) => {
                if points.len() == 1 {
                    return points[0].1;
                }
                let idx = points.partition_point(|p| p.0 <= f);
                if idx == 0 {
                    return points[0].1;
                }
                if idx == points.len() {
                    return points[points.len() - 1].1;
                }
                let (f0, d0) = points[idx - 1];
                let (f1, d1) = points[idx];
                d0 + (d1 - d0) * (f - f0) / (f1 - f0)
            }
        }
    }

    /// Gaussian standard deviation in Hz for a 3 dB bandwidth.
    pub fn gaussian_sigma(bw3db: f64) -> f64 {
        bw3db / GAUSS_FWHM_PER_SIGMA
    }

    /// `(fc, B)` of the uniform band with the same support.
    pub fn band_center_width(&self) -> (f64, f64) {
        let (lo, hi) = self.support();
        (0.5 * (lo + hi), hi - lo)
    }
}

impl PsdSpec {
    pub fn new(shape: PsdShape, power: f64) -> Result<Self> {
        shape.validate()?;
        if !(power >= 0.0) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "source power must be nonnegative, got {power}"
            )));
        }
        Ok(Self { shape, power })
    }

    /// The support must lie strictly inside `(0, fs/2)`.
    pub fn check_nyquist(&self, fs: f64) -> Result<()> {
        let (lo, hi) = self.shape.support();
        if !(lo > 0.0) || !(hi < 0.5 * fs) {
            return Err(Error::InvalidParameter(format!(
                "PSD support [{lo}, {hi}] Hz must lie inside (0, {}) Hz",
                0.5 * fs
            )));
        }
        Ok(())
    }
}
