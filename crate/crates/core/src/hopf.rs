//! Closed-form Hopf crossing data at leading order in the branch amplitude.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma0::BifCoefficients;

#[derive(Debug, Clone, Serialize)]
pub struct HopfData {
    pub hopf_possible: bool,
    pub delta_star: f64,
    pub theta_star: f64,
    pub omega: f64,
    pub theta_amp: f64,
    pub sigma_ladder: Vec<f64>,
    /// Limit of `Re dmu/dsigma / theta_amp^2` on each rung.
    pub transversality: Vec<f64>,
    pub xi_limit: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gamma0Stability {
    Stable,
    Unstable,
    HopfPoint,
}

/// `4 kappa0 = kappa != 0` or `kappa (4 kappa0 - kappa) > 0`.
pub fn hopf_condition(kappa0: f64, kappa: f64) -> bool {
    let scale = 1e-12 * (1.0 + kappa0.abs() + kappa.abs());
    ((4.0 * kappa0 - kappa).abs() <= scale && kappa.abs() > scale) || kappa * (4.0 * kappa0 - kappa) > 0.0
}

/// `F(delta, theta) = -i delta + kappa/2 - kappa0 + e^{-i theta} kappa0`.
pub fn f_residual(kappa0: f64, kappa: f64, delta: f64, theta: f64) -> Complex64 {
    Complex64::new(kappa / 2.0 - kappa0, -delta) + Complex64::from_polar(kappa0, -theta)
}

/// (delta*, theta*) solving `F = 0`, theta* in [0, 2 pi).
pub fn delta_theta(kappa0: f64, kappa: f64, theta_amp: f64) -> Result<(f64, f64)> {
    if theta_amp == 0.0 {
        return Err(Error::AmplitudeZero);
    }
    let disc = kappa * (4.0 * kappa0 - kappa);
    if !(disc > 0.0) {
        return Err(Error::OutOfRegime(format!("kappa (4 kappa0 - kappa) = {disc:e} is not positive")));
    }
    let delta = theta_amp.signum() * disc.sqrt() / 2.0;
    // e^{-i theta} = (i delta - kappa/2 + kappa0) / kappa0
    let z = Complex64::new(kappa0 - kappa / 2.0, -delta) / kappa0;
    let theta = z.arg().rem_euclid(2.0 * PI);
    Ok((delta, theta))
}

pub fn xi_n_limit(kappa0: f64, kappa: f64, delta: f64, theta: f64, n: usize) -> Complex64 {
    let t = theta + 2.0 * PI * n as f64;
    Complex64::new(1.0, 0.0) + Complex64::new(kappa0 - kappa / 2.0, delta) * (t / delta)
}

/// `delta*^2 / |Xi_n|^2`.
pub fn transversality_sign(delta: f64, xi: Complex64) -> f64 {
    delta * delta / xi.norm_sqr()
}

pub fn crossing_data(coeffs: &BifCoefficients, theta_amp: f64, n_max: usize) -> Result<HopfData> {
    crossing_data_raw(coeffs.kappa0, coeffs.kappa, theta_amp, n_max)
}

pub fn crossing_data_raw(kappa0: f64, kappa: f64, theta_amp: f64, n_max: usize) -> Result<HopfData> {
    let hopf_possible = hopf_condition(kappa0, kappa);
    let (delta, theta) = delta_theta(kappa0, kappa, theta_amp)?;
    let omega = theta_amp * delta;
    let sigma_ladder = (0..=n_max).map(|n| (theta + 2.0 * PI * n as f64) / omega).collect();
    let xis: Vec<Complex64> = (0..=n_max).map(|n| xi_n_limit(kappa0, kappa, delta, theta, n)).collect();
    Ok(HopfData {
        hopf_possible,
        delta_star: delta,
        theta_star: theta,
        omega,
        theta_amp,
        sigma_ladder,
        transversality: xis.iter().map(|x| transversality_sign(delta, *x)).collect(),
        xi_limit: xis.iter().map(|x| (x.re, x.im)).collect(),
    })
}

/// Stability of the Gamma0 steady state at (lambda, sigma).
pub fn classify_gamma0_stability(
    coeffs: &BifCoefficients,
    lambda: f64,
    sigma: f64,
    hopf: Option<&HopfData>,
) -> Gamma0Stability {
    if coeffs.rho * (lambda - coeffs.lambda1) < 0.0 {
        return Gamma0Stability::Unstable;
    }
    let Some(h) = hopf.filter(|h| h.hopf_possible) else {
        return Gamma0Stability::Stable;
    };
    let s0 = h.sigma_ladder[0];
    if (sigma - s0).abs() <= 1e-12 * s0 {
        Gamma0Stability::HopfPoint
    } else if sigma < s0 {
        Gamma0Stability::Stable
    } else {
        Gamma0Stability::Unstable
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_example() {
        let (d, t) = delta_theta(1.0, 2.0, 0.1).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert!((t - 1.5 * PI).abs() < 1e-14);
        assert!(f_residual(1.0, 2.0, d, t).norm() < 1e-14);
        let xi = xi_n_limit(1.0, 2.0, d, t, 0);
        assert!((xi - Complex64::new(1.0, 1.5 * PI)).norm() < 1e-14);
        let tr = transversality_sign(d, xi);
        assert!((tr - 1.0 / (1.0 + 9.0 * PI * PI / 4.0)).abs() < 1e-15);
    }

    #[test]
    fn conditions() {
        assert!(hopf_condition(1.0, 2.0));
        assert!(!hopf_condition(0.0, -1.3));
        assert!(hopf_condition(0.5, 2.0));
        assert!(!hopf_condition(0.0, 0.0));
    }

    #[test]
    fn zero_amplitude_is_rejected() {
        assert_eq!(delta_theta(1.0, 2.0, 0.0), Err(Error::AmplitudeZero));
        assert!(matches!(delta_theta(0.0, 1.0, 0.1), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn xi_with_zero_phase_is_one() {
        let xi = xi_n_limit(1.0, 3.0, 0.5, 0.0, 0);
        assert_eq!(xi, Complex64::new(1.0, 0.0));
    }
}
