//! Damped Newton solver for steady states and natural-parameter continuation.

use serde::Serialize;

use crate::discrete::{steady_jacobian, steady_residual, weighted_norm};
use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::gamma0::BifCoefficients;
use crate::gamma1::Gamma1Data;
use crate::grid::{Field, Grid1D};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NewtonOptions {
    /// Tolerance on the quadrature-weighted max norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 50, min_step: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyState {
    #[serde(skip)]
    pub u_star: Field,
    pub lambda: f64,
    pub residual_norm: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchOrigin {
    Gamma0,
    GammaU1,
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub origin: BranchOrigin,
    pub points: Vec<SteadyState>,
    /// `<u*, phi1>` for Gamma0 branches, the parameter s for GammaU1.
    pub amplitudes: Vec<f64>,
}

fn merit(grid: &Grid1D, r: &Field) -> f64 {
    grid.inner(r, r).sqrt()
}

pub fn solve_steady(grid: &Grid1D, model: &ModelSpec, lambda: f64, guess: &Field, opts: &NewtonOptions) -> Result<SteadyState> {
    if guess.len() != grid.len() {
        return Err(Error::Validation("guess length does not match grid".into()));
    }
    let mut u = guess.clone();
    let mut r = steady_residual(grid, model, lambda, &u);
    let mut res = weighted_norm(grid, &r);
    let mut polished = false;
    for it in 0..=opts.max_iter {
        if !res.is_finite() {
            break;
        }
        if res < opts.tol {
            if polished || res == 0.0 {
                return Ok(SteadyState { u_star: u, lambda, residual_norm: res, newton_iterations: it });
            }
            polished = true;
        }
        if it == opts.max_iter {
            break;
        }
        let jac = steady_jacobian(grid, model, lambda, &u);
        let Some(du) = jac.solve(&(-&r)) else { break };
        let m0 = merit(grid, &r);
        let mut t = 1.0;
        loop {
            let trial = &u + &du * t;
            let rt = steady_residual(grid, model, lambda, &trial);
            let mt = merit(grid, &rt);
            if mt <= (1.0 - 1e-4 * t) * m0 || t <= opts.min_step || polished {
                u = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
        res = weighted_norm(grid, &r);
        if polished && res < opts.tol {
            return Ok(SteadyState { u_star: u, lambda, residual_norm: res, newton_iterations: it + 1 });
        }
    }
    Err(Error::NewtonDiverged { lambda, residual: res })
}

/// Signed branch amplitude `<u, phi1>`.
pub fn amplitude(grid: &Grid1D, eig: &EigenPair, u: &Field) -> f64 {
    grid.inner(u, &eig.phi1)
}

/// Solves at a single lambda near lambda1 from the reduced-equation
/// predictor, without any sign restriction on the solution.
pub fn solve_near_bifurcation(
    grid: &Grid1D,
    model: &ModelSpec,
    eig: &EigenPair,
    coeffs: &BifCoefficients,
    lambda: f64,
    opts: &NewtonOptions,
) -> Result<SteadyState> {
    let theta = coeffs.branch_predictor(lambda);
    let guess = &eig.phi1 * theta;
    let s = solve_steady(grid, model, lambda, &guess, opts)?;
    if Grid1D::max_abs(&s.u_star) < 1e-3 * theta.abs() {
        return Err(Error::NewtonDiverged { lambda, residual: s.residual_norm });
    }
    Ok(s)
}

/// Positive Gamma0 branch over the given lambda values.
pub fn continue_branch_gamma0(
    grid: &Grid1D,
    model: &ModelSpec,
    eig: &EigenPair,
    coeffs: &BifCoefficients,
    lambdas: &[f64],
    opts: &NewtonOptions,
) -> Result<Branch> {
    let l1 = eig.lambda1;
    let mut admissible: Vec<f64> = lambdas.iter().copied().filter(|&l| coeffs.branch_predictor(l) > 0.0).collect();
    if admissible.is_empty() {
        return Err(Error::EmptyBranch);
    }
    admissible.sort_by(|a, b| (a - l1).abs().partial_cmp(&(b - l1).abs()).unwrap());
    // continue separately on each side of lambda1 (only one side is admissible
    // when kappa != 0, but keep it general)
    let mut points = Vec::new();
    for side in [-1.0, 1.0] {
        let mut prev: Vec<(f64, Field)> = Vec::new();
        for &lam in admissible.iter().filter(|&&l| (l - l1) * side > 0.0) {
            let guess = match prev.len() {
                0 => &eig.phi1 * coeffs.branch_predictor(lam),
                1 => &prev[0].1 * (coeffs.branch_predictor(lam) / coeffs.branch_predictor(prev[0].0)),
                _ => {
                    let (la, ua) = &prev[prev.len() - 2];
                    let (lb, ub) = &prev[prev.len() - 1];
                    ub + (ub - ua) * ((lam - lb) / (lb - la))
                }
            };
            let s = match solve_steady(grid, model, lam, &guess, opts) {
                Ok(s) => s,
                Err(_) => break,
            };
            if s.u_star.iter().any(|&v| v <= 0.0) {
                break;
            }
            prev.push((lam, s.u_star.clone()));
            points.push(s);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyBranch);
    }
    points.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    let amplitudes = points.iter().map(|p| amplitude(grid, eig, &p.u_star)).collect();
    Ok(Branch { origin: BranchOrigin::Gamma0, points, amplitudes })
}

/// Branch through (u1, 0) parametrised by lambda = s.
pub fn continue_branch_gamma1(
    grid: &Grid1D,
    model: &ModelSpec,
    g1: &Gamma1Data,
    s_values: &[f64],
    opts: &NewtonOptions,
) -> Result<Branch> {
    let mut s_sorted = s_values.to_vec();
    s_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s_sorted.dedup();
    let mut points = Vec::new();
    let mut amps = Vec::new();
    let base = Field::from_element(grid.len(), g1.u1);
    for &s in &s_sorted {
        let guess = &base + (Field::from_element(grid.len(), g1.eta1) + &g1.psi_star) * s;
        let st = solve_steady(grid, model, s, &guess, opts)?;
        points.push(st);
        amps.push(s);
    }
    if points.is_empty() {
        return Err(Error::EmptyBranch);
    }
    Ok(Branch { origin: BranchOrigin::GammaU1, points, amplitudes: amps })
}

/// Both sides of the integrated steady equation: `lambda * int u f` and the
/// negated boundary flux sum `-(sum (1 + d u) q)` built from the discrete
/// memory flux.
pub fn green_identity(grid: &Grid1D, model: &ModelSpec, lambda: f64, u: &Field) -> (f64, f64) {
    let reaction = grid.integrate(&Field::from_fn(grid.len(), |i, _| lambda * u[i] * model.f(grid.nodes[i], u[i])));
    let q = crate::discrete::boundary_fluxes(model, lambda, u);
    let n = grid.n;
    let continuum = -((1.0 + model.d * u[0]) * q.0 + (1.0 + model.d * u[n]) * q.1);
    (reaction, continuum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Expr;

    #[test]
    fn zero_guess_is_fixed_point() {
        let g = Grid1D::new(32, 1.0).unwrap();
        let m = ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.4, 1.0).unwrap();
        let s = solve_steady(&g, &m, 5.0, &Field::zeros(33), &NewtonOptions::default()).unwrap();
        assert_eq!(s.residual_norm, 0.0);
        assert_eq!(s.u_star.amax(), 0.0);
    }

    #[test]
    fn constants_solve_at_zero_lambda() {
        let g = Grid1D::new(32, 1.0).unwrap();
        let m = ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.4, 1.0).unwrap();
        let c = Field::from_element(33, 0.7);
        let s = solve_steady(&g, &m, 0.0, &c, &NewtonOptions::default()).unwrap();
        assert_eq!(s.residual_norm, 0.0);
        assert!((s.u_star - c).amax() == 0.0);
    }

    #[test]
    fn rejects_mismatched_guess() {
        let g = Grid1D::new(32, 1.0).unwrap();
        let m = ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.4, 1.0).unwrap();
        assert!(solve_steady(&g, &m, 1.0, &Field::zeros(10), &NewtonOptions::default()).is_err());
    }
}
