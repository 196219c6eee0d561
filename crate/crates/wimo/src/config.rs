//! Declarative experiment description.
//!
//! An [`ExperimentSpec`] is read from JSON. Every field has a default, so a
//! config file only lists what differs. `key=value` overrides address fields
//! by dotted path (`sources.1.snr_db=5`); paths that do not exist in the
//! schema are rejected by name. [`CONFIG_KEYS`] documents every key and is
//! checked against the serialized default in the tests.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use wimo_core::approx::{Quadrature, SpectrumAssumption, DEFAULT_RANK_TOL};
use wimo_core::estimators::{angle_grid, linspace, Method, OrderRule};
use wimo_core::math::deg_to_rad;
use wimo_core::metrics::f_lo_for_eta;
use wimo_core::{ArrayGeometry, PsdShape, PsdSpec};

use crate::error::{Result, WimoError};
use crate::simulator::{Scenario, SourceSignal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub array: ArraySpec,
    pub sources: Vec<SourceSpec>,
    pub sampling: SamplingSpec,
    pub estimator: EstimatorSpec,
    pub trials: usize,
    pub rho: f64,
    pub jitter_deg: f64,
    pub sweep: SweepSpec,
    pub check: CheckSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Ula,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySpec {
    pub kind: ArrayKind,
    pub n_sensors: usize,
    pub spacing: Option<f64>,
    pub positions: Option<Vec<[f64; 3]>>,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub theta_deg: f64,
    #[serde(default)]
    pub phi_deg: f64,
    pub snr_db: f64,
    pub psd: PsdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsdConfig {
    Uniform {
        f_lo: f64,
        f_hi: f64,
    },
    Gaussian {
        fc: f64,
        bw3db: f64,
        f_lo: f64,
        f_hi: f64,
    },
    Sinc2 {
        fc: f64,
        bw3db: f64,
        f_lo: f64,
        f_hi: f64,
    },
    Tabulated {
        points: Vec<[f64; 2]>,
    },
}

impl PsdConfig {
    pub fn shape(&self) -> PsdShape {
        match self {
            PsdConfig::Uniform { f_lo, f_hi } => PsdShape::uniform(*f_lo, *f_hi),
            PsdConfig::Gaussian {
                fc,
                bw3db,
                f_lo,
                f_hi,
            } => PsdShape::Gaussian {
                fc: *fc,
                bw3db: *bw3db,
                band: (*f_lo, *f_hi),
            },
            PsdConfig::Sinc2 {
                fc,
                bw3db,
                f_lo,
                f_hi,
            } => PsdShape::Sinc2 {
                fc: *fc,
                bw3db: *bw3db,
                band: (*f_lo, *f_hi),
            },
            PsdConfig::Tabulated { points } => {
                PsdShape::Tabulated(points.iter().map(|p| (p[0], p[1])).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSpec {
    pub fs: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub noise_power: f64,
    pub noiseless: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodName {
    #[serde(rename = "1-wimo")]
    OneWimo,
    #[serde(rename = "p-wimo")]
    PWimo,
    #[serde(rename = "sf-cbf")]
    SfCbf,
    #[serde(rename = "sf-mvdr")]
    SfMvdr,
    #[serde(rename = "sf-music")]
    SfMusic,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::OneWimo => Method::OneWimo,
            MethodName::PWimo => Method::PWimo,
            MethodName::SfCbf => Method::SfCbf,
            MethodName::SfMvdr => Method::SfMvdr,
            MethodName::SfMusic => Method::SfMusic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsdAssumption {
    Uniform,
    TruePsd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSpec {
    pub method: MethodName,
    pub m: usize,
    /// Signal-subspace order; `None` selects it automatically.
    pub p: Option<usize>,
    pub grid: GridSpec,
    pub psd_assumption: PsdAssumption,
    pub assumed_band: Option<[f64; 2]>,
    pub rank_tol: f64,
    pub min_prominence_db: f64,
    pub refine_peaks: bool,
    pub freq_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Snr,
    Bandwidth,
    Separation,
    Snapshots,
    Rho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
}

/// Assertions evaluated by `bench --check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSpec {
    pub min_resolution: Option<f64>,
    pub max_rmse_deg: Option<f64>,
    pub nondecreasing_resolution: bool,
}

/// Every config key with its meaning. Array elements appear as `[]`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    (
        "array.kind",
        "array type: \"ula\" (z-axis, sensor 0 at origin) or \"custom\"",
    ),
    ("array.n_sensors", "number of ULA sensors"),
    (
        "array.spacing",
        "ULA spacing in m; null = half the shortest wavelength c/(2 f_max)",
    ),
    (
        "array.positions",
        "custom sensor positions [[x,y,z], ...] in m",
    ),
    ("array.speed", "propagation speed c in m/s"),
    ("sources[].theta_deg", "source elevation in degrees"),
    ("sources[].phi_deg", "source azimuth in degrees (default 0)"),
    (
        "sources[].snr_db",
        "per-sensor SNR in dB (source power over noise_power)",
    ),
    (
        "sources[].psd.kind",
        "source PSD: uniform | gaussian | sinc2 | tabulated",
    ),
    (
        "sources[].psd.f_lo",
        "lower band edge in Hz (uniform, gaussian, sinc2)",
    ),
    (
        "sources[].psd.f_hi",
        "upper band edge in Hz (uniform, gaussian, sinc2)",
    ),
    ("sources[].psd.fc", "PSD centre in Hz (gaussian, sinc2)"),
    (
        "sources[].psd.bw3db",
        "3 dB bandwidth in Hz (gaussian, sinc2)",
    ),
    (
        "sources[].psd.points",
        "tabulated PSD [[f_hz, density], ...]; one point = spectral line",
    ),
    ("sampling.fs", "sampling rate in Hz"),
    ("sampling.snapshots", "number of array snapshots M"),
    (
        "sampling.seed",
        "base seed; trial i uses a seed derived from (seed, i)",
    ),
    (
        "sampling.noise_power",
        "complex noise variance per sensor sample",
    ),
    ("sampling.noiseless", "omit sensor noise"),
    (
        "estimator.method",
        "1-wimo | p-wimo | sf-cbf | sf-mvdr | sf-music",
    ),
    ("estimator.m", "temporal lag order m"),
    (
        "estimator.p",
        "signal-subspace order P; null = automatic rule from MDL and the effective dimension",
    ),
    ("estimator.grid.start_deg", "first grid angle in degrees"),
    ("estimator.grid.stop_deg", "last grid angle in degrees"),
    ("estimator.grid.step_deg", "grid step in degrees"),
    (
        "estimator.psd_assumption",
        "spectrum model for the approximate covariance: uniform | true_psd",
    ),
    (
        "estimator.assumed_band",
        "[f_lo, f_hi] in Hz for the uniform model; null = union of source bands",
    ),
    (
        "estimator.rank_tol",
        "relative eigenvalue threshold for numerical ranks",
    ),
    (
        "estimator.min_prominence_db",
        "minimum peak prominence in dB",
    ),
    (
        "estimator.refine_peaks",
        "parabolic sub-grid peak refinement",
    ),
    (
        "estimator.freq_count",
        "frequency grid size for sf-* methods (spans the assumed band)",
    ),
    ("trials", "Monte Carlo trials per sweep point"),
    ("rho", "correlation coefficient between sources 0 and 1"),
    (
        "jitter_deg",
        "per-trial common DOA offset drawn uniformly from [-jitter, +jitter] degrees",
    ),
    (
        "sweep.axis",
        "null | snr | bandwidth (eta, fraction) | separation (deg) | snapshots | rho",
    ),
    ("sweep.values", "values of the swept quantity"),
    (
        "check.min_resolution",
        "bench --check: minimum resolution probability at every point",
    ),
    (
        "check.max_rmse_deg",
        "bench --check: maximum RMSE (resolved trials) at every point",
    ),
    (
        "check.nondecreasing_resolution",
        "bench --check: resolution probability nondecreasing along the sweep within one MC std",
    ),
];

/// Key table rendered for `--help`.
pub fn keys_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("CONFIG KEYS (JSON file or --set key=value; sources[] is indexed as sources.0, sources.1, ...):\n");
    for (k, d) in CONFIG_KEYS {
        out.push_str(&format!("  {k:<width$}  {d}\n"));
    }
    out
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            kind: ArrayKind::Ula,
            n_sensors: 8,
            spacing: None,
            positions: None,
            speed: 1500.0,
        }
    }
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            fs: 10_000.0,
            snapshots: 8192,
            seed: 1,
            noise_power: 1.0,
            noiseless: false,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start_deg: -90.0,
            stop_deg: 90.0,
            step_deg: 1.0,
        }
    }
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            method: MethodName::OneWimo,
            m: 6,
            p: None,
            grid: GridSpec::default(),
            psd_assumption: PsdAssumption::Uniform,
            assumed_band: None,
            rank_tol: DEFAULT_RANK_TOL,
            min_prominence_db: wimo_core::metrics::RESOLUTION_MIN_PROMINENCE_DB,
            refine_peaks: true,
            freq_count: 31,
        }
    }
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let source = |theta_deg| SourceSpec {
            theta_deg,
            phi_deg: 0.0,
            snr_db: 20.0,
            psd: PsdConfig::Uniform {
                f_lo: 1500.0,
                f_hi: 4500.0,
            },
        };
        Self {
            array: ArraySpec::default(),
            sources: vec![source(15.0), source(25.0)],
            sampling: SamplingSpec::default(),
            estimator: EstimatorSpec::default(),
            trials: 50,
            rho: 0.0,
            jitter_deg: 0.0,
            sweep: SweepSpec::default(),
            check: CheckSpec::default(),
        }
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    for seg in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(seg),
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| WimoError::UnknownKey(key.to_string()))?;
    }
    *node = value;
    Ok(())
}

fn config_error(e: serde_json::Error) -> WimoError {
    WimoError::Config(e.to_string())
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_error)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WimoError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies `key=value` overrides. Values parse as JSON, falling back to a
    /// bare string (`estimator.method=p-wimo`).
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut tree = serde_json::to_value(self)?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| WimoError::Config(format!("override '{item}' is not key=value")))?;
            let value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut tree, key.trim(), value)?;
        }
        serde_json::from_value(tree).map_err(config_error)
    }

    pub fn method(&self) -> Method {
        self.estimator.method.into()
    }

    pub fn order_rule(&self) -> OrderRule {
        self.estimator.p.map_or(OrderRule::Auto, OrderRule::Manual)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(WimoError::Config(msg));
        if self.sources.is_empty() {
            return bad("at least one source is required".into());
        }
        if self.estimator.m < 1 {
            return bad("estimator.m must be at least 1".into());
        }
        if self.sampling.snapshots < self.estimator.m {
            return bad(format!(
                "sampling.snapshots ({}) must be at least estimator.m ({})",
                self.sampling.snapshots, self.estimator.m
            ));
        }
        if !(self.estimator.rank_tol > 0.0 && self.estimator.rank_tol < 1.0) {
            return bad(format!(
                "estimator.rank_tol must lie in (0, 1), got {}",
                self.estimator.rank_tol
            ));
        }
        if !(self.jitter_deg >= 0.0) {
            return bad(format!(
                "jitter_deg must be nonnegative, got {}",
                self.jitter_deg
            ));
        }
        if self.estimator.freq_count == 0 {
            return bad("estimator.freq_count must be positive".into());
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !(-90.0..=90.0).contains(&s.theta_deg) {
                return bad(format!("sources.{i}.theta_deg must lie in [-90, 90]"));
            }
            if !s.snr_db.is_finite() {
                return bad(format!("sources.{i}.snr_db must be finite"));
            }
            PsdSpec::new(s.psd.shape(), 1.0)?.check_nyquist(self.sampling.fs)?;
        }
        if let Some([lo, hi]) = self.estimator.assumed_band {
            if !(hi >= lo && lo > 0.0) {
                return bad(format!(
                    "estimator.assumed_band [{lo}, {hi}] is not a positive band"
                ));
            }
        }
        self.grid()?;
        self.geometry()?;
        if let Some(axis) = self.sweep.axis {
            if self.sweep.values.is_empty() {
                return bad("sweep.values is empty".into());
            }
            for v in &self.sweep.values {
                self.at_sweep_value(axis, *v)?;
            }
        }
        Ok(())
    }

    /// Highest frequency carried by any source.
    pub fn max_frequency(&self) -> f64 {
        self.sources
            .iter()
            .map(|s| s.psd.shape().support().1)
            .fold(0.0, f64::max)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let a = &self.array;
        Ok(match a.kind {
            ArrayKind::Ula => {
                let spacing = match a.spacing {
                    Some(d) => d,
                    None => {
                        let f = self.max_frequency();
                        if !(f > 0.0) {
                            return Err(WimoError::Config(
                                "array.spacing is null and no source band is set".into(),
                            ));
                        }
                        a.speed / (2.0 * f)
                    }
                };
                ArrayGeometry::ula(a.n_sensors, spacing, a.speed)?
            }
            ArrayKind::Custom => {
                let positions = a.positions.clone().ok_or_else(|| {
                    WimoError::Config("array.kind = custom needs array.positions".into())
                })?;
                ArrayGeometry::new(positions, a.speed)?
            }
        })
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let g = &self.estimator.grid;
        Ok(angle_grid(g.start_deg, g.stop_deg, g.step_deg)?)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sampling.fs
    }

    /// Band `[f_lo, f_hi]` of the uniform model.
    pub fn assumed_band(&self) -> [f64; 2] {
        self.estimator.assumed_band.unwrap_or_else(|| {
            let lo = self
                .sources
                .iter()
                .map(|s| s.psd.shape().support().0)
                .fold(f64::INFINITY, f64::min);
            [lo, self.max_frequency()]
        })
    }

    pub fn assumption(&self) -> SpectrumAssumption {
        match self.estimator.psd_assumption {
            PsdAssumption::Uniform => {
                let [lo, hi] = self.assumed_band();
                SpectrumAssumption::Uniform {
                    fc: 0.5 * (lo + hi),
                    bandwidth: hi - lo,
                }
            }
            PsdAssumption::TruePsd => SpectrumAssumption::Psd {
                shape: self.sources[0].psd.shape(),
                quadrature: Quadrature::default(),
            },
        }
    }

    /// Frequency grid of the space-frequency maps.
    pub fn freqs(&self) -> Vec<f64> {
        let [lo, hi] = self.assumed_band();
        linspace(lo, hi, self.estimator.freq_count)
    }

    pub fn truth_deg(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.theta_deg).collect()
    }

    /// Simulation scenario with every source shifted by `jitter_deg`.
    pub fn scenario(&self, jitter_deg: f64) -> Result<Scenario> {
        let noise = self.sampling.noise_power;
        let sources = self
            .sources
            .iter()
            .map(|s| {
                let power = noise * 10f64.powf(s.snr_db / 10.0);
                Ok(SourceSignal {
                    theta: deg_to_rad(s.theta_deg + jitter_deg),
                    phi: deg_to_rad(s.phi_deg),
                    psd: PsdSpec::new(s.psd.shape(), power)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            geometry: self.geometry()?,
            sources,
            fs: self.sampling.fs,
            snapshots: self.sampling.snapshots,
            noise_power: if self.sampling.noiseless { 0.0 } else { noise },
            rho: self.rho,
        })
    }

    /// The spec at one point of a sweep.
    pub fn at_sweep_value(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut s = self.clone();
        match axis {
            SweepAxis::Snr => s.sources.iter_mut().for_each(|src| src.snr_db = value),
            SweepAxis::Bandwidth => {
                for (i, src) in s.sources.iter_mut().enumerate() {
                    let PsdConfig::Uniform { f_lo, f_hi } = &mut src.psd else {
                        return Err(WimoError::Config(format!(
                            "bandwidth sweep needs uniform PSDs (sources.{i})"
                        )));
                    };
                    *f_lo = f_lo_for_eta(*f_hi, value)?;
                }
                s.estimator.assumed_band = None;
            }
            SweepAxis::Separation => {
                if s.sources.len() != 2 {
                    return Err(WimoError::Config(
                        "separation sweep needs exactly two sources".into(),
                    ));
                }
                let centre = 0.5 * (s.sources[0].theta_deg + s.sources[1].theta_deg);
                s.sources[0].theta_deg = centre - 0.5 * value;
                s.sources[1].theta_deg = centre + 0.5 * value;
            }
            SweepAxis::Snapshots => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(WimoError::Config(format!(
                        "snapshot count must be a positive integer, got {value}"
                    )));
                }
                s.sampling.snapshots = value as usize;
            }
            SweepAxis::Rho => s.rho = value,
        }
        s.sweep = SweepSpec::default();
        Ok(s)
    }

    /// Canonical description of everything the modal cache depends on.
    pub fn cache_key(&self) -> Result<Value> {
        let geometry = self.geometry()?;
        let positions: Vec<[u64; 3]> = geometry
            .positions()
            .iter()
            .map(|p| [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()])
            .collect();
        let assumption = match self.assumption() {
            SpectrumAssumption::Uniform { fc, bandwidth } => {
                serde_json::json!({"uniform": [fc.to_bits(), bandwidth.to_bits()]})
            }
            SpectrumAssumption::Psd { .. } => serde_json::json!({"psd": self.sources[0].psd}),
        };
        Ok(serde_json::json!({
            "positions": positions,
            "speed": geometry.speed().to_bits(),
            "m": self.estimator.m,
            "dt": self.dt().to_bits(),
            "phi": 0,
            "assumption": assumption,
            "grid": self.grid()?.iter().map(|g| g.to_bits()).collect::<Vec<_>>(),
        }))
    }
}
