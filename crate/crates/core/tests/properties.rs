use proptest::prelude::*;
use wimo_core::approx::{
    approx_stcm_psd, approx_stcm_uniform, band_average_power, factorization_check, modal_basis,
    ModalCache, Quadrature, SpectrumAssumption,
};
use wimo_core::estimators::{
    find_peaks, spectrum_1wimo, spectrum_pwimo, NoiseProjector, PeakOptions,
};
use wimo_core::linalg::{dot, norm, CMatrix, HermitianEigen};
use wimo_core::math::{cis, deg_to_rad};
use wimo_core::stcm::{eigen_split, estimate_stcm, SnapshotMatrix};
use wimo_core::{ArrayGeometry, PsdShape, C64};

const C: f64 = 1500.0;

#[derive(Debug, Clone)]
struct Config {
    positions: Vec<[f64; 3]>,
    theta: f64,
    fc: f64,
    bandwidth: f64,
    m: usize,
    dt: f64,
}

fn config() -> impl Strategy<Value = Config> {
    (
        prop::collection::vec(prop::array::uniform3(-0.5f64..0.5), 1..6),
        -90.0f64..90.0,
        500.0f64..5000.0,
        0.0f64..1.0,
        1usize..8,
        2e-5f64..2e-4,
    )
        .prop_map(|(positions, theta, fc, frac, m, dt)| Config {
            positions,
            theta: deg_to_rad(theta),
            fc,
            bandwidth: 2.0 * fc * frac,
            m,
            dt,
        })
}

fn build(c: &Config) -> wimo_core::approx::ApproxStcm {
    let g = ArrayGeometry::new(c.positions.clone(), C).unwrap();
    approx_stcm_uniform(&g, c.theta, 0.0, c.fc, c.bandwidth, c.m, c.dt).unwrap()
}

fn unit_vector(seed: &[(f64, f64)]) -> Vec<C64> {
    let v: Vec<C64> = seed.iter().map(|(a, b)| C64::new(*a, *b)).collect();
    let n = norm(&v).max(1e-300);
    v.into_iter().map(|z| z / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factors_and_product_are_psd(c in config()) {
        let s = build(&c);
        let top = modal_basis(&s).unwrap().sigma[0];
        for m in [s.matrix(), s.narrow(), s.wide()] {
            let eig = HermitianEigen::new(m).unwrap();
            prop_assert!(*eig.values.last().unwrap() >= -1e-10 * top);
        }
    }

    #[test]
    fn hadamard_identity_and_unit_trace(c in config()) {
        let s = build(&c);
        let l = s.dim();
        let prod = s.narrow().hadamard(s.wide());
        for r in 0..l {
            for k in 0..l {
                let a = s.matrix()[(r, k)];
                prop_assert!((a - prod[(r, k)]).norm() <= 1e-12 * a.norm().max(1e-300) + 1e-15);
            }
        }
        let b = modal_basis(&s).unwrap();
        let sum: f64 = b.sigma.iter().sum();
        prop_assert!((sum - l as f64).abs() <= 1e-9 * l as f64);
        prop_assert!((s.matrix().trace().re - l as f64).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_quotient_bounded_by_top_eigenvalue(
        c in config(),
        probe in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 56),
    ) {
        let s = build(&c);
        let b = modal_basis(&s).unwrap();
        let x = unit_vector(&probe[..s.dim()]);
        prop_assert!(s.matrix().quad_form(&x).re <= b.sigma[0] + 1e-9);
        let at_gsv = s.matrix().quad_form(&b.gsv()).re;
        prop_assert!((at_gsv - b.sigma[0]).abs() <= 1e-6);
    }

    #[test]
    fn factorization_holds(c in config()) {
        let s = build(&c);
        let b = modal_basis(&s).unwrap();
        let report = factorization_check(&s, &b).unwrap();
        prop_assert!(report.eigenvalues_match(), "mismatch {}", report.eigenvalue_mismatch);
        prop_assert!(report.vectors_match(), "angle {}", report.max_angle());
    }

    #[test]
    fn sample_covariance_is_psd_and_split_reconstructs(
        n_sensors in 1usize..4,
        m in 1usize..5,
        samples in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4 * 40),
    ) {
        let cols = 40;
        let data = CMatrix::from_fn(n_sensors, cols, |r, t| {
            let (a, b) = samples[r * cols + t];
            C64::new(a, b)
        });
        let snap = SnapshotMatrix::new(data, 1000.0).unwrap();
        let est = estimate_stcm(&snap, m).unwrap();
        let eig = est.eigen().unwrap();
        prop_assert!(*eig.values.last().unwrap() >= -1e-10 * eig.values[0]);
        let l = est.dim();
        prop_assert!(est.matrix().hermitian_defect() <= 1e-12 * est.matrix().frobenius_norm());
        if l >= 2 {
            let split = eigen_split(&est, 1.max(l / 2)).unwrap();
            let u = split.vectors();
            let recon = CMatrix::from_fn(l, l, |r, k| {
                (0..l).map(|i| u[(r, i)] * split.eigenvalues()[i] * u[(k, i)].conj()).sum()
            });
            let rel = recon.sub(est.matrix()).frobenius_norm() / est.matrix().frobenius_norm();
            prop_assert!(rel < 1e-9);
            let us = split.signal();
            let un = split.noise();
            for a in 0..us.cols() {
                for b in 0..un.cols() {
                    prop_assert!(dot(&us.column(a), &un.column(b)).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn spectra_invariant_under_origin_shift(
        offset in prop::array::uniform3(-2.0f64..2.0),
        theta in -70.0f64..70.0,
    ) {
        let base = ArrayGeometry::ula(5, C / 9000.0, C).unwrap();
        let shifted = base.translated(offset);
        let grid: Vec<f64> = (-90..=90).step_by(3).map(f64::from).collect();
        let assumption = SpectrumAssumption::Uniform { fc: 3000.0, bandwidth: 3000.0 };
        // the observed covariance does not depend on where the origin is
        let s = approx_stcm_uniform(&base, deg_to_rad(theta), 0.0, 3000.0, 3000.0, 3, 1e-4).unwrap();
        let eig = HermitianEigen::new(s.matrix()).unwrap();
        let pi = NoiseProjector::from_basis(&eig.vectors.column_block(4, 15));
        let run = |geom: &ArrayGeometry| {
            let cache = ModalCache::build(geom, &grid, 0.0, &assumption, 3, 1e-4).unwrap();
            (spectrum_1wimo(&pi, &cache, 3).unwrap(), spectrum_pwimo(&pi, &cache, 3).unwrap())
        };
        let (a1, ap) = run(&base);
        let (b1, bp) = run(&shifted);
        // compared on the denominators, whose natural scales are 1 and L;
        // pointwise ratios near a null are conditioned by the null depth
        for (spec_a, spec_b, scale) in [(&a1, &b1, 1.0), (&ap, &bp, 15.0)] {
            for (x, y) in spec_a.values.iter().zip(&spec_b.values) {
                prop_assert!((1.0 / x - 1.0 / y).abs() <= 1e-9 * scale, "{x} vs {y}");
            }
        }
        prop_assert_eq!(a1.argmax(), b1.argmax());
    }
}

#[test]
fn quadrature_matches_closed_form_for_flat_psd() {
    let geom = ArrayGeometry::ula(8, C / 9000.0, C).unwrap();
    for theta in [0.0, 25.0, 61.0, 90.0] {
        let t = deg_to_rad(theta);
        let closed = approx_stcm_uniform(&geom, t, 0.0, 3000.0, 3000.0, 5, 1e-4).unwrap();
        let numeric = approx_stcm_psd(
            &geom,
            t,
            0.0,
            &PsdShape::uniform(1500.0, 4500.0),
            5,
            1e-4,
            &Quadrature::fixed(4096),
        )
        .unwrap();
        let err = closed
            .matrix()
            .as_slice()
            .iter()
            .zip(numeric.matrix().as_slice())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "theta {theta}: {err}");
    }
}

#[test]
fn gaussian_psd_envelope_matches_fourier_pair() {
    let geom = ArrayGeometry::ula(4, C / 9000.0, C).unwrap();
    let (fc, bw3db) = (3000.0, 600.0);
    let s = PsdShape::gaussian_sigma(bw3db);
    let psd = PsdShape::Gaussian {
        fc,
        bw3db,
        band: (fc - 8.0 * s, fc + 8.0 * s),
    };
    let approx = approx_stcm_psd(&geom, 0.7, 0.0, &psd, 4, 1e-4, &Quadrature::default()).unwrap();
    let h = approx.model().h();
    let l = h.len();
    for r in 0..l {
        for k in 0..l {
            let d = h[r] - h[k];
            let want = cis(2.0 * std::f64::consts::PI * fc * d)
                * (-2.0 * std::f64::consts::PI.powi(2) * s * s * d * d).exp();
            assert!((approx.matrix()[(r, k)] - want).norm() < 1e-7, "({r},{k})");
        }
    }
}

#[test]
fn gsv_of_wide_factor_maximizes_band_power() {
    let geom = ArrayGeometry::ula(4, C / 9000.0, C).unwrap();
    let s = approx_stcm_uniform(&geom, deg_to_rad(35.0), 0.0, 3000.0, 3000.0, 3, 1e-4).unwrap();
    let eig = HermitianEigen::new(s.wide()).unwrap();
    let h = s.model().h();
    let top = band_average_power(&eig.vector(0), h, 3000.0, 2000);
    assert!((top - eig.values[0]).abs() < 1e-9 * eig.values[0]);
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for _ in 0..1000 {
        let probe: Vec<(f64, f64)> = (0..h.len()).map(|_| (next(), next())).collect();
        let x = unit_vector(&probe);
        assert!(band_average_power(&x, h, 3000.0, 400) <= top + 1e-9);
    }
}

#[test]
fn off_grid_source_is_interpolated() {
    let geom = ArrayGeometry::ula(8, C / 9000.0, C).unwrap();
    let (m, dt) = (5, 1e-4);
    let truth = 20.37;
    let s = approx_stcm_uniform(&geom, deg_to_rad(truth), 0.0, 3000.0, 3000.0, m, dt).unwrap();
    let eig = HermitianEigen::new(s.matrix()).unwrap();
    let p = modal_basis(&s).unwrap().rank(1e-3);
    let pi = NoiseProjector::from_basis(&eig.vectors.column_block(p, 40));
    let grid: Vec<f64> = (-90..=90).map(f64::from).collect();
    let assumption = SpectrumAssumption::Uniform {
        fc: 3000.0,
        bandwidth: 3000.0,
    };
    let cache = ModalCache::build(&geom, &grid, 0.0, &assumption, m, dt).unwrap();
    for spec in [
        spectrum_1wimo(&pi, &cache, m).unwrap(),
        spectrum_pwimo(&pi, &cache, m).unwrap(),
    ] {
        let peaks = find_peaks(&spec, &PeakOptions::default());
        let top = peaks.peaks[0].theta_deg;
        assert!((top - truth).abs() < 0.1, "{:?}: {top}", spec.method);
    }
}
