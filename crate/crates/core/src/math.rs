//! Scalar helpers shared by the model and approximation code.

use core::f64::consts::PI;

use crate::C64;

/// Normalized sinc, `sin(pi x) / (pi x)`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        // sin(u)/u = 1 - u^2/6 + O(u^4); the quartic term is below 1e-30 here
        let u = PI * x;
        1.0 - u * u / 6.0
    } else {
        let u = PI * x;
        libm::sin(u) / u
    }
}

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    let (s, c) = libm::sincos(phase);
    C64::new(c, s)
}

#[inline]
pub fn deg_to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

#[inline]
pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

#[inline]
pub fn db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_zero_and_integers() {
        assert_eq!(sinc(0.0), 1.0);
        for k in 1..6 {
            assert!(sinc(k as f64).abs() < 1e-15);
            assert!(sinc(-(k as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn sinc_series_branch_is_continuous() {
        let a = sinc(0.999e-8);
        let b = sinc(1.001e-8);
        assert!((a - b).abs() < 1e-15);
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
    }
}
