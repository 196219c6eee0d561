//! Far-field wideband array data.
//!
//! Each source is colored complex Gaussian noise synthesized on an FFT grid
//! of `n_fft >= M + pad` bins with the target PSD, so the source is periodic
//! in `n_fft`. Delays are applied as exact phase ramps `exp(-j 2 pi f tau)`
//! on that grid (a circular fractional delay, which for a periodic signal is
//! the true delay) and the first `M` samples are kept.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use wimo_core::geometry::sensor_delays;
use wimo_core::linalg::CMatrix;
use wimo_core::math::cis;
use wimo_core::stcm::SnapshotMatrix;
use wimo_core::{ArrayGeometry, PsdSpec, C64};

use crate::error::{Result, WimoError};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSignal {
    /// Elevation in radians.
    pub theta: f64,
    pub phi: f64,
    pub psd: PsdSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub sources: Vec<SourceSignal>,
    pub fs: f64,
    pub snapshots: usize,
    /// Per-sensor complex noise variance; zero for noiseless data.
    pub noise_power: f64,
    /// Correlation coefficient imposed between sources 0 and 1.
    pub rho: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.snapshots == 0 {
            return Err(WimoError::Config("snapshot count must be positive".into()));
        }
        if !(self.noise_power >= 0.0) {
            return Err(WimoError::Config(format!(
                "noise power must be nonnegative, got {}",
                self.noise_power
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(WimoError::Config(format!(
                "rho must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        if self.rho != 0.0 && self.sources.len() < 2 {
            return Err(WimoError::Config("rho needs at least two sources".into()));
        }
        for s in &self.sources {
            s.psd.check_nyquist(self.fs)?;
        }
        Ok(())
    }

    /// FFT length: a power of two covering `M` plus four times the largest
    /// delay in samples.
    pub fn fft_len(&self) -> usize {
        let pad = (self.fs * self.geometry.max_delay()).ceil() as usize * 4;
        (self.snapshots + pad).next_power_of_two()
    }
}

/// Source excitation on the FFT grid or, for a spectral line, as a tone.
#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    Spectrum(Vec<C64>),
    Tone { freq: f64, amplitude: C64 },
}

/// Signed frequency of FFT bin `b`.
pub fn bin_frequency(b: usize, n: usize, fs: f64) -> f64 {
    let signed = if b < n.div_ceil(2) {
        b as f64
    } else {
        b as f64 - n as f64
    };
    signed * fs / n as f64
}

fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Draws one source excitation with total power `psd.power`. Always
/// consumes `n` complex normals so the random stream layout does not depend
/// on the PSD.
pub fn synthesize_source(psd: &PsdSpec, fs: f64, n: usize, rng: &mut ChaCha8Rng) -> Excitation {
    let draws: Vec<C64> = (0..n).map(|_| complex_normal(rng, 1.0)).collect();
    if let Some(freq) = psd.shape.line_frequency() {
        return Excitation::Tone {
            freq,
            amplitude: cis(draws[0].arg()) * psd.power.sqrt(),
        };
    }
    let mut weights: Vec<f64> = (0..n)
        .map(|b| psd.shape.density(bin_frequency(b, n, fs)).max(0.0))
        .collect();
    let mut total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // band narrower than one bin: put the power on the bin nearest the centre
        let (fc, _) = psd.shape.band_center_width();
        let b = ((fc / fs * n as f64).round() as usize) % n;
        weights[b] = 1.0;
        total = 1.0;
    }
    let scale = n as f64 * psd.power.sqrt();
    Excitation::Spectrum(
        draws
            .iter()
            .zip(&weights)
            .map(|(z, w)| z * (w / total).sqrt() * scale)
            .collect(),
    )
}

/// `x2 <- rho x1 + sqrt(1 - rho^2) x2`.
pub fn correlate_pair(x1: &Excitation, x2: &Excitation, rho: f64) -> Result<Excitation> {
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    match (x1, x2) {
        (Excitation::Spectrum(a), Excitation::Spectrum(b)) => Ok(Excitation::Spectrum(
            a.iter().zip(b).map(|(p, q)| p * rho + q * c).collect(),
        )),
        (
            Excitation::Tone {
                freq: f1,
                amplitude: a,
            },
            Excitation::Tone {
                freq: f2,
                amplitude: b,
            },
        ) if f1 == f2 => Ok(Excitation::Tone {
            freq: *f1,
            amplitude: a * rho + b * c,
        }),
        _ => Err(WimoError::Config(
            "correlated sources must both be broadband or tones at one frequency".into(),
        )),
    }
}

/// Noise-free sensor signals: each source delayed by its per-sensor `tau`.
pub fn propagate(scenario: &Scenario, excitations: &[Excitation]) -> Result<CMatrix> {
    let n = scenario.fft_len();
    let n_sensors = scenario.geometry.n_sensors();
    let m = scenario.snapshots;
    let fs = scenario.fs;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let delays: Vec<Vec<f64>> = scenario
        .sources
        .iter()
        .map(|s| sensor_delays(&scenario.geometry, s.theta, s.phi))
        .collect();
    let freqs: Vec<f64> = (0..n).map(|b| bin_frequency(b, n, fs)).collect();
    let has_spectrum = excitations
        .iter()
        .any(|e| matches!(e, Excitation::Spectrum(_)));

    let mut out = CMatrix::zeros(n_sensors, m);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for i in 0..n_sensors {
        if has_spectrum {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for (src, ex) in excitations.iter().enumerate() {
                if let Excitation::Spectrum(x) = ex {
                    let tau = delays[src][i];
                    for ((acc, xb), f) in buf.iter_mut().zip(x).zip(&freqs) {
                        if xb.re != 0.0 || xb.im != 0.0 {
                            *acc += xb * cis(-2.0 * PI * f * tau);
                        }
                    }
                }
            }
            ifft.process(&mut buf);
            let inv = 1.0 / n as f64;
            for t in 0..m {
                out[(i, t)] = buf[t] * inv;
            }
        }
        for (src, ex) in excitations.iter().enumerate() {
            if let Excitation::Tone { freq, amplitude } = ex {
                let tau = delays[src][i];
                for t in 0..m {
                    out[(i, t)] += amplitude * cis(2.0 * PI * freq * (t as f64 / fs - tau));
                }
            }
        }
    }
    Ok(out)
}

/// Adds complex white Gaussian noise of variance `power` per sample.
pub fn add_noise(data: &mut CMatrix, power: f64, rng: &mut ChaCha8Rng) {
    if power <= 0.0 {
        return;
    }
    for v in data.as_mut_slice() {
        *v += complex_normal(rng, power);
    }
}

/// Full synthesis for one seed: sources in order, then noise.
pub fn simulate(scenario: &Scenario, seed: u64) -> Result<SnapshotMatrix> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scenario.fft_len();
    let mut excitations: Vec<Excitation> = scenario
        .sources
        .iter()
        .map(|s| synthesize_source(&s.psd, scenario.fs, n, &mut rng))
        .collect();
    if scenario.rho != 0.0 {
        excitations[1] = correlate_pair(&excitations[0], &excitations[1], scenario.rho)?;
    }
    let mut data = propagate(scenario, &excitations)?;
    add_noise(&mut data, scenario.noise_power, &mut rng);
    Ok(SnapshotMatrix::new(data, scenario.fs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use wimo_core::math::deg_to_rad;
    use wimo_core::PsdShape;

    fn scenario(sources: Vec<SourceSignal>, noise: f64) -> Scenario {
        Scenario {
            geometry: ArrayGeometry::ula(4, 1500.0 / 9000.0, 1500.0).unwrap(),
            sources,
            fs: 10_000.0,
            snapshots: 4096,
            noise_power: noise,
            rho: 0.0,
        }
    }

    fn band(theta_deg: f64, power: f64) -> SourceSignal {
        SourceSignal {
            theta: deg_to_rad(theta_deg),
            phi: 0.0,
            psd: PsdSpec::new(PsdShape::uniform(1500.0, 4500.0), power).unwrap(),
        }
    }

    #[test]
    fn power_and_determinism() {
        let sc = scenario(vec![band(30.0, 4.0)], 0.0);
        let a = simulate(&sc, 11).unwrap();
        let b = simulate(&sc, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate(&sc, 12).unwrap();
        assert_ne!(a, c);
        let p: f64 = a
            .data()
            .as_slice()
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / (4.0 * 4096.0);
        assert!((p - 4.0).abs() < 0.4, "{p}");
    }

    #[test]
    fn noise_only_has_unit_variance() {
        let sc = scenario(vec![], 1.0);
        let a = simulate(&sc, 3).unwrap();
        let p: f64 = a
            .data()
            .as_slice()
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / (4.0 * 4096.0);
        assert!((p - 1.0).abs() < 0.05);
    }

    #[test]
    fn tone_delay_is_exact() {
        let psd = PsdSpec::new(PsdShape::Tabulated(vec![(2000.0, 1.0)]), 1.0).unwrap();
        let sc = scenario(
            vec![SourceSignal {
                theta: deg_to_rad(40.0),
                phi: 0.0,
                psd,
            }],
            0.0,
        );
        let y = simulate(&sc, 5).unwrap();
        let tau = sensor_delays(&sc.geometry, deg_to_rad(40.0), 0.0);
        for i in 1..4 {
            let want = cis(-2.0 * PI * 2000.0 * (tau[i] - tau[0]));
            for t in [0, 17, 4095] {
                let got = y.data()[(i, t)] / y.data()[(0, t)];
                assert!((got - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn broadband_delay_matches_bin_phase_ramp() {
        // a single on-grid bin carries the exact delay
        let sc = scenario(vec![band(20.0, 1.0)], 0.0);
        let n = sc.fft_len();
        let mut x = vec![C64::new(0.0, 0.0); n];
        let b = n / 4;
        x[b] = C64::new(n as f64, 0.0);
        let y = propagate(&sc, &[Excitation::Spectrum(x)]).unwrap();
        let f = bin_frequency(b, n, sc.fs);
        let tau = sensor_delays(&sc.geometry, deg_to_rad(20.0), 0.0);
        for i in 0..4 {
            for t in [0, 100, 4000] {
                let want = cis(2.0 * PI * f * (t as f64 / sc.fs - tau[i]));
                assert!((y[(i, t)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn correlation_coefficient_is_imposed() {
        let mut sc = scenario(vec![band(10.0, 1.0), band(40.0, 1.0)], 0.0);
        sc.rho = 0.8;
        sc.geometry = ArrayGeometry::new(vec![[0.0; 3]], 1500.0).unwrap();
        let y = simulate(&sc, 9).unwrap();
        // one sensor, both sources arrive undelayed: y = x1 + x2' with E|y|^2 = 2 + 2 rho
        let p: f64 = y
            .data()
            .as_slice()
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / 4096.0;
        assert!((p - 3.6).abs() < 0.4, "{p}");
        sc.rho = 1.5;
        assert!(simulate(&sc, 9).is_err());
    }

    #[test]
    fn nyquist_violations_rejected() {
        let mut sc = scenario(vec![band(0.0, 1.0)], 1.0);
        sc.fs = 8000.0;
        assert!(simulate(&sc, 1).is_err());
    }
}
