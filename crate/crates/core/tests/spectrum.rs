use memdiff_core::spectrum::{
    continue_in_sigma, count_roots_in_rect, crossings, delay_free_spectrum, first_crossing, log_char, newton_root,
    theta_sweep, LinearizedPair, SpectrumOptions,
};
use memdiff_core::tridiag::Tridiag;
use num_complex::Complex64;
use proptest::prelude::*;

/// `mu = p + q e^{-mu sigma}` padded with a strongly damped second mode.
fn scalar(p: f64, q: f64) -> LinearizedPair {
    LinearizedPair {
        a: Tridiag { sub: vec![0.0], diag: vec![p, -50.0], sup: vec![0.0] },
        b: Tridiag { sub: vec![0.0], diag: vec![q, 0.0], sup: vec![0.0] },
        weights: vec![1.0, 1.0],
    }
}

/// Closed-form first crossing of the scalar equation when `q < -|p|`.
fn scalar_crossing(p: f64, q: f64) -> (f64, f64) {
    let omega = (q * q - p * p).sqrt();
    // cos(omega sigma) = -p / q, sin(omega sigma) = -omega / q
    let phase = (-omega / q).atan2(-p / q).rem_euclid(2.0 * std::f64::consts::PI);
    (omega, phase / omega)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scalar_crossing_matches_closed_form(p in -2.0f64..0.5, excess in 0.3f64..3.0) {
        let q = -(p.abs() + excess);
        let pair = scalar(p, q);
        let opts = SpectrumOptions { tracked: 2, ..Default::default() };
        let sweep = theta_sweep(&pair, &opts);
        let c = first_crossing(&pair, &sweep).unwrap();
        let (omega, sigma) = scalar_crossing(p, q);
        prop_assert!((c.omega - omega).abs() < 1e-8 * omega);
        prop_assert!((c.sigma - sigma).abs() < 1e-8 * sigma);
        // d mu / d sigma = -q mu e / (1 + q sigma e), with q e = i omega - p on the axis
        let mu = Complex64::new(0.0, omega);
        let qe = mu - p;
        let want = -mu * qe / (1.0 + sigma * qe);
        let got = Complex64::new(c.dmu_dsigma.0, c.dmu_dsigma.1);
        prop_assert!((got - want).norm() < 1e-6 * want.norm(), "{got} vs {want}");
        prop_assert!(want.re > 0.0);
        let all = crossings(&pair, &sweep, 3.0 * sigma + 20.0 / omega);
        for w in all.windows(2) {
            prop_assert!(w[1].sigma > w[0].sigma);
        }
    }

    #[test]
    fn newton_root_satisfies_the_characteristic_equation(p in -2.0f64..-0.5, q in -1.0f64..1.0, sigma in 0.1f64..2.0) {
        let pair = scalar(p, q);
        let Some(mu) = newton_root(&pair, Complex64::new(p, 0.1), sigma, 10.0) else { return Ok(()) };
        let r = mu - p - q * (-mu * sigma).exp();
        prop_assert!(r.norm() < 1e-8 * (1.0 + mu.norm()));
    }
}

#[test]
fn count_matches_dense_spectrum_without_delay() {
    let pair = LinearizedPair {
        a: Tridiag { sub: vec![1.0, 0.5, 0.2], diag: vec![0.3, -1.0, 0.8, -2.0], sup: vec![-1.0, 0.4, 0.1] },
        b: Tridiag { sub: vec![0.1, 0.0, 0.0], diag: vec![-0.2, 0.1, 0.0, 0.3], sup: vec![0.0, 0.1, 0.0] },
        weights: vec![1.0; 4],
    };
    let dense = delay_free_spectrum(&pair);
    let r = 10.0;
    let n = count_roots_in_rect(&pair, 0.0, (0.0, r), (-r, r)).unwrap();
    assert_eq!(n as usize, dense.unstable_count);
}

#[test]
fn log_derivative_matches_finite_difference() {
    let pair = scalar(-1.0, -3.0);
    let mu = Complex64::new(0.2, 1.1);
    let (_, d) = log_char(&pair, mu, 0.7);
    let h = 1e-6;
    let fd = (log_char(&pair, mu + h, 0.7).0 - log_char(&pair, mu - h, 0.7).0) / (2.0 * h);
    assert!((d - fd).norm() < 1e-6 * d.norm());
}

#[test]
fn sweep_grid_must_increase() {
    let pair = scalar(-1.0, -3.0);
    assert!(continue_in_sigma(&pair, &[0.0, 1.0, 0.5], &Default::default()).is_err());
    assert!(continue_in_sigma(&pair, &[-1.0, 1.0], &Default::default()).is_err());
}
