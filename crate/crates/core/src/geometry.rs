//! Array geometry, propagation delays and stacked spatial-temporal model
//! vectors.
//!
//! Angles are radians here. Linear arrays lie on the z-axis, so the
//! elevation `theta` alone fixes the delays (`phi` multiplies x/y only).

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::cis;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
    speed: f64,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>, speed: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidGeometry(
                "at least one sensor is required".into(),
            ));
        }
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "propagation speed must be positive, got {speed}"
            )));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGeometry(
                "sensor positions must be finite".into(),
            ));
        }
        Ok(Self { positions, speed })
    }

    /// Uniform linear array on the z-axis with sensor 0 at the origin.
    pub fn ula(n_sensors: usize, spacing: f64, speed: f64) -> Result<Self> {
        if !spacing.is_finite() {
            return Err(Error::InvalidGeometry("spacing must be finite".into()));
        }
        let positions = (0..n_sensors)
            .map(|k| [0.0, 0.0, k as f64 * spacing])
            .collect();
        Self::new(positions, speed)
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn n_sensors(&self) -> usize {
        self.positions.len()
    }

    /// Same geometry with every sensor moved by `offset`.
    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
            .collect();
        Self {
            positions,
            speed: self.speed,
        }
    }

    /// Largest `|tau_k|` over all directions: aperture radius about the origin over c.
    pub fn max_delay(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]))
            .fold(0.0, f64::max)
            / self.speed
    }
}

/// Unit propagation direction `u(theta, phi)`.
pub fn direction(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = libm::sincos(theta);
    let (sp, cp) = libm::sincos(phi);
    [ct * cp, ct * sp, st]
}

/// `tau_k = -u(theta, phi)^T p_k / c` for every sensor.
pub fn sensor_delays(geometry: &ArrayGeometry, theta: f64, phi: f64) -> Vec<f64> {
    let u = direction(theta, phi);
    geometry
        .positions
        .iter()
        .map(|p| -(u[0] * p[0] + u[1] * p[1] + u[2] * p[2]) / geometry.speed)
        .collect()
}

/// Narrowband steering vector, `a_k = exp(-j 2 pi fc tau_k)`.
pub fn steering_vector(geometry: &ArrayGeometry, theta: f64, phi: f64, fc: f64) -> Vec<C64> {
    sensor_delays(geometry, theta, phi)
        .into_iter()
        .map(|tau| cis(-2.0 * PI * fc * tau))
        .collect()
}

/// Delay vector of the stacked observation for one direction.
///
/// Entry `k` belongs to sensor `k / m` and temporal slot `k % m`; slot `j`
/// holds the sample taken `j` intervals after the oldest one in the window,
/// so `h_k = -tau_{k/m} + (k % m) * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    geometry: ArrayGeometry,
    m: usize,
    dt: f64,
    theta: f64,
    phi: f64,
    h: Vec<f64>,
}

pub fn build_stacked_model(
    geometry: &ArrayGeometry,
    theta: f64,
    phi: f64,
    m: usize,
    dt: f64,
) -> Result<StackedModel> {
    if m < 1 {
        return Err(Error::InvalidParameter(
            "temporal lag order m must be at least 1".into(),
        ));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sampling interval must be positive, got {dt}"
        )));
    }
    let tau = sensor_delays(geometry, theta, phi);
    let h = (0..m * geometry.n_sensors())
        .map(|k| -tau[k / m] + (k % m) as f64 * dt)
        .collect();
    Ok(StackedModel {
        geometry: geometry.clone(),
        m,
        dt,
        theta,
        phi,
        h,
    })
}

impl StackedModel {
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// `L = m * N_S`.
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `g_k = exp(j 2 pi h_k f)`.
    pub fn g_vector(&self, f: f64) -> Vec<C64> {
        self.h.iter().map(|&hk| cis(2.0 * PI * hk * f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::deg_to_rad;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn broadside_delays_vanish() {
        let g = ArrayGeometry::ula(8, 0.1875, 1500.0).unwrap();
        assert!(sensor_delays(&g, 0.0, 0.0).iter().all(|t| t.abs() < 1e-20));
    }

    #[test]
    fn endfire_and_thirty_degrees() {
        let g = ArrayGeometry::new(alloc::vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.15]], 1500.0).unwrap();
        let tau = sensor_delays(&g, deg_to_rad(90.0), 0.0);
        assert_eq!(tau[0], 0.0);
        assert!(close(tau[1], -1e-4, 1e-18));
        let tau = sensor_delays(&g, deg_to_rad(30.0), 0.0);
        assert!(close(tau[1], -5e-5, 1e-18));
    }

    #[test]
    fn stacked_delays_follow_sensor_major_layout() {
        let g = ArrayGeometry::new(alloc::vec![[0.0, 0.0, 0.0], [0.0, 0.0, 0.15]], 1500.0).unwrap();
        let model = build_stacked_model(&g, deg_to_rad(90.0), 0.0, 2, 1e-4).unwrap();
        let expect = [0.0, 1e-4, 1e-4, 2e-4];
        for (a, b) in model.h().iter().zip(expect) {
            assert!(close(*a, b, 1e-18));
        }
        let single = ArrayGeometry::new(alloc::vec![[0.0; 3]], 1500.0).unwrap();
        let model = build_stacked_model(&single, 0.3, 0.0, 3, 1e-4).unwrap();
        assert_eq!(model.h(), &[0.0, 1e-4, 2e-4]);
    }

    #[test]
    fn m_one_is_negated_delays_and_steering_vector() {
        let g = ArrayGeometry::ula(5, 0.2, 1500.0).unwrap();
        let theta = deg_to_rad(23.0);
        let model = build_stacked_model(&g, theta, 0.0, 1, 1e-4).unwrap();
        let tau = sensor_delays(&g, theta, 0.0);
        for (h, t) in model.h().iter().zip(&tau) {
            assert_eq!(*h, -t);
        }
        let a = steering_vector(&g, theta, 0.0, 3100.0);
        for (x, y) in model.g_vector(3100.0).iter().zip(&a) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn g_vector_examples() {
        let g = ArrayGeometry::ula(3, 0.1, 1500.0).unwrap();
        let model = build_stacked_model(&g, 0.7, 0.0, 4, 1e-4).unwrap();
        assert!(model.g_vector(0.0).iter().all(|v| *v == C64::new(1.0, 0.0)));
        let norm2: f64 = model.g_vector(2345.0).iter().map(|v| v.norm_sqr()).sum();
        assert!(close(norm2, 12.0, 1e-12));

        let single = ArrayGeometry::new(alloc::vec![[0.0; 3]], 1500.0).unwrap();
        let model = build_stacked_model(&single, 0.0, 0.0, 2, 1e-4).unwrap();
        let v = model.g_vector(2500.0);
        assert!((v[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn half_wavelength_ula_steering() {
        let f0 = 4000.0;
        let c = 1500.0;
        let g = ArrayGeometry::ula(8, c / (2.0 * f0), c).unwrap();
        let theta = deg_to_rad(40.0);
        let a = steering_vector(&g, theta, 0.0, f0);
        for (k, ak) in a.iter().enumerate() {
            // tau_k = -z_k sin(theta)/c makes the phase progression positive
            let want = cis(PI * k as f64 * libm::sin(theta));
            assert!((ak - want).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(ArrayGeometry::new(alloc::vec![], 1500.0).is_err());
        assert!(ArrayGeometry::ula(2, 0.1, 0.0).is_err());
        assert!(ArrayGeometry::new(alloc::vec![[f64::NAN, 0.0, 0.0]], 1.0).is_err());
        let g = ArrayGeometry::ula(2, 0.1, 1500.0).unwrap();
        assert!(build_stacked_model(&g, 0.0, 0.0, 0, 1e-4).is_err());
        assert!(build_stacked_model(&g, 0.0, 0.0, 2, 0.0).is_err());
    }
}
