//! Coefficients of the reduced equation at the bifurcation point (0, lambda1).
//!
//! Elements of the range space are pairs `(y1, y2)`: an interior field and the
//! boundary values at (x = 0, x = L). The functional pairing with the left
//! null vector is `<Psi, y> = int phi1 y1 - sum phi1 y2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::discrete::{collapse, steady_jacobian};
use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ZeroEigClass {
    NoZeroEig,
    ZeroEig,
}

#[derive(Debug, Clone, Serialize)]
pub struct BifCoefficients {
    pub lambda1: f64,
    pub rho: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa: f64,
    /// `<Psi, T_uu[phi1, phi1]>` evaluated from the assembled second derivative.
    pub kappa_direct: f64,
    pub nu: f64,
    #[serde(skip)]
    pub sigma_field: Field,
}

impl BifCoefficients {
    /// Leading-order amplitude `2 rho (lambda1 - lambda) / kappa`.
    pub fn branch_predictor(&self, lambda: f64) -> f64 {
        2.0 * self.rho * (self.lambda1 - lambda) / self.kappa
    }

    pub fn zero_scale(&self) -> f64 {
        1e-10 * (1.0 + self.kappa0.abs() + self.kappa1.abs() + self.kappa2.abs())
    }

    pub fn classify_zero_eigenvalue(&self) -> ZeroEigClass {
        if self.kappa.abs() > self.zero_scale() {
            ZeroEigClass::NoZeroEig
        } else {
            ZeroEigClass::ZeroEig
        }
    }
}

pub fn psi_pairing(grid: &Grid1D, phi: &Field, y1: &Field, y2: (f64, f64)) -> f64 {
    grid.inner(phi, y1) - (phi[0] * y2.0 + phi[grid.n] * y2.1)
}

/// Boundary flux of a kernel element: `lambda1 r g_u(0) v_b`.
fn linear_flux(model: &ModelSpec, lambda: f64, v: &Field) -> (f64, f64) {
    let gu = model.g_u(0.0);
    let n = v.len() - 1;
    (lambda * model.r0 * gu * v[0], lambda * model.r1 * gu * v[n])
}

/// Linearisation at u = 0 acting on a field `w` with free boundary derivative `q`.
pub fn apply_l(grid: &Grid1D, model: &ModelSpec, lambda: f64, w: &Field, q: (f64, f64)) -> (Field, (f64, f64)) {
    let mut y1 = grid.laplacian(w, q.0, q.1);
    for i in 0..grid.len() {
        y1[i] += lambda * model.f(grid.nodes[i], 0.0) * w[i];
    }
    let lf = linear_flux(model, lambda, w);
    (y1, (q.0 - lf.0, q.1 - lf.1))
}

/// `T_uu[phi1, phi1]` at (0, lambda1) as an (interior, boundary) pair.
pub fn second_derivative(grid: &Grid1D, model: &ModelSpec, eig: &EigenPair) -> (Field, (f64, f64)) {
    let phi = &eig.phi1;
    let l1 = eig.lambda1;
    let q = linear_flux(model, l1, phi);
    let mut y1 = grid.flux_divergence(phi, phi, q, q) * (2.0 * model.d);
    for i in 0..grid.len() {
        y1[i] += 2.0 * l1 * model.f_u(grid.nodes[i], 0.0) * phi[i] * phi[i];
    }
    let guu = model.g_uu(0.0);
    let n = grid.n;
    (y1, (-l1 * model.r0 * guu * phi[0] * phi[0], -l1 * model.r1 * guu * phi[n] * phi[n]))
}

/// (rho, kappa0, kappa1, kappa2, kappa).
pub fn compute_rho_kappa(grid: &Grid1D, model: &ModelSpec, eig: &EigenPair) -> (f64, f64, f64, f64, f64) {
    let phi = &eig.phi1;
    let l1 = eig.lambda1;
    let n = grid.n;
    let gu = model.g_u(0.0);
    let rho = grid.integrate(&Field::from_fn(grid.len(), |i, _| phi[i] * phi[i] * model.f(grid.nodes[i], 0.0)))
        + gu * (model.r0 * phi[0] * phi[0] + model.r1 * phi[n] * phi[n]);
    let kappa0 = if model.d == 0.0 {
        0.0
    } else {
        let q = linear_flux(model, l1, phi);
        model.d * grid.inner(phi, &grid.flux_divergence(phi, phi, q, q))
    };
    let kappa1 = l1 * grid.integrate(&Field::from_fn(grid.len(), |i, _| phi[i].powi(3) * model.f_u(grid.nodes[i], 0.0)));
    let kappa2 = l1 * model.g_uu(0.0) * (model.r0 * phi[0].powi(3) + model.r1 * phi[n].powi(3));
    let kappa = 2.0 * kappa0 + 2.0 * kappa1 + kappa2;
    (rho, kappa0, kappa1, kappa2, kappa)
}

/// Correction field: `L sigma = -(I - Q) T_uu[phi1, phi1]` with `<phi1, sigma> = 0`.
/// Returns the field and its boundary derivative.
pub fn solve_sigma_correction(grid: &Grid1D, model: &ModelSpec, eig: &EigenPair) -> Result<(Field, (f64, f64))> {
    let (y1, y2) = second_derivative(grid, model, eig);
    let phi = &eig.phi1;
    let kappa = psi_pairing(grid, phi, &y1, y2);
    let proj1 = &y1 - phi * kappa;
    let rhs = -collapse(grid, &proj1, y2);

    let n1 = grid.len();
    let jac = steady_jacobian(grid, model, eig.lambda1, &Field::zeros(n1)).to_dense();
    let mut mat = DMatrix::zeros(n1 + 1, n1 + 1);
    mat.view_mut((0, 0), (n1, n1)).copy_from(&jac);
    for i in 0..n1 {
        mat[(i, n1)] = phi[i];
        mat[(n1, i)] = grid.weights[i] * phi[i];
    }
    let mut b = DVector::zeros(n1 + 1);
    b.rows_mut(0, n1).copy_from(&rhs);
    let sol = mat.lu().solve(&b).ok_or(Error::SingularBorderedSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularBorderedSystem);
    }
    let sigma: Field = sol.rows(0, n1).into_owned();
    let lf = linear_flux(model, eig.lambda1, &sigma);
    let q = (lf.0 - y2.0, lf.1 - y2.1);
    Ok((sigma, q))
}

/// Residual `|L sigma + (I - Q) y|` of the correction equation (interior part, weighted).
pub fn sigma_residual(grid: &Grid1D, model: &ModelSpec, eig: &EigenPair, sigma: &Field, q: (f64, f64)) -> f64 {
    let (y1, y2) = second_derivative(grid, model, eig);
    let kappa = psi_pairing(grid, &eig.phi1, &y1, y2);
    let (l1, l2) = apply_l(grid, model, eig.lambda1, sigma, q);
    let r1 = l1 + y1 - &eig.phi1 * kappa;
    let r1w = r1.iter().zip(&grid.weights).fold(0.0_f64, |m, (v, w)| m.max((v * w).abs()));
    r1w.max((l2.0 + y2.0).abs()).max((l2.1 + y2.1).abs())
}

pub fn compute_nu(grid: &Grid1D, model: &ModelSpec, eig: &EigenPair, sigma: &Field, q_sigma: (f64, f64)) -> f64 {
    let phi = &eig.phi1;
    let l1 = eig.lambda1;
    let n = grid.n;
    let x = &grid.nodes;
    let cubic = 3.0 * l1 * grid.integrate(&Field::from_fn(grid.len(), |i, _| phi[i].powi(4) * model.f_uu(x[i], 0.0)))
        + l1 * model.g_uuu(0.0) * (model.r0 * phi[0].powi(4) + model.r1 * phi[n].powi(4));
    let memory = if model.d == 0.0 {
        0.0
    } else {
        let qp = linear_flux(model, l1, phi);
        let a = grid.inner(phi, &grid.flux_divergence(phi, sigma, qp, q_sigma));
        let b = grid.inner(phi, &grid.flux_divergence(sigma, phi, q_sigma, qp));
        3.0 * model.d * (a + b)
    };
    let mixed = 6.0 * l1 * grid.integrate(&Field::from_fn(grid.len(), |i, _| phi[i] * phi[i] * sigma[i] * model.f_u(x[i], 0.0)))
        + 3.0 * l1 * model.g_uu(0.0) * (model.r0 * phi[0] * phi[0] * sigma[0] + model.r1 * phi[n] * phi[n] * sigma[n]);
    cubic + memory + mixed
}

pub fn compute_coefficients(grid: &Grid1D, model: &ModelSpec, eig: &EigenPair) -> Result<BifCoefficients> {
    let (rho, kappa0, kappa1, kappa2, kappa) = compute_rho_kappa(grid, model, eig);
    let (y1, y2) = second_derivative(grid, model, eig);
    let kappa_direct = psi_pairing(grid, &eig.phi1, &y1, y2);
    let (sigma_field, q) = solve_sigma_correction(grid, model, eig)?;
    let nu = compute_nu(grid, model, eig, &sigma_field, q);
    Ok(BifCoefficients { lambda1: eig.lambda1, rho, kappa0, kappa1, kappa2, kappa, kappa_direct, nu, sigma_field })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BifurcationKind {
    Transcritical,
    Pitchfork,
}

pub fn bifurcation_kind(c: &BifCoefficients) -> Result<BifurcationKind> {
    match c.classify_zero_eigenvalue() {
        ZeroEigClass::NoZeroEig => Ok(BifurcationKind::Transcritical),
        ZeroEigClass::ZeroEig if c.nu.abs() > c.zero_scale() => Ok(BifurcationKind::Pitchfork),
        ZeroEigClass::ZeroEig => Err(Error::Indeterminate("kappa = nu = 0".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::principal_eigenpair;
    use crate::model::Expr;

    fn fixture(d: f64, n: usize) -> (Grid1D, ModelSpec, EigenPair) {
        let m = Expr::Sum { terms: vec![Expr::Cos { k: 1.0, amp: 1.0 }, Expr::constant(-0.2)] };
        let g = Grid1D::new(n, 1.0).unwrap();
        let spec = ModelSpec::logistic(m, -1.0, -1.0, d, 1.0).unwrap();
        let e = principal_eigenpair(&g, &spec).unwrap();
        (g, spec, e)
    }

    #[test]
    fn no_memory_no_kappa0() {
        let (g, m, e) = fixture(0.0, 64);
        let (_, k0, _, k2, _) = compute_rho_kappa(&g, &m, &e);
        assert_eq!(k0, 0.0);
        let n = g.n;
        let expect = 2.0 * e.lambda1 * (-e.phi1[0].powi(3) - e.phi1[n].powi(3));
        assert!((k2 - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn sigma_correction_solves_its_equation() {
        let (g, m, e) = fixture(0.3, 128);
        let (s, q) = solve_sigma_correction(&g, &m, &e).unwrap();
        assert!(sigma_residual(&g, &m, &e, &s, q) < 1e-9);
        assert!(g.inner(&s, &e.phi1).abs() < 1e-10);
    }

    #[test]
    fn classification_thresholds() {
        let (g, m, e) = fixture(0.1, 64);
        let mut c = compute_coefficients(&g, &m, &e).unwrap();
        c.kappa = 0.8;
        assert_eq!(c.classify_zero_eigenvalue(), ZeroEigClass::NoZeroEig);
        c.kappa = 0.0;
        assert_eq!(c.classify_zero_eigenvalue(), ZeroEigClass::ZeroEig);
    }
}
