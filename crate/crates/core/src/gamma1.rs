//! Bifurcation from the line of constant solutions at lambda = 0.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::model::ModelSpec;

#[derive(Debug, Clone, Serialize)]
pub struct Gamma1Data {
    pub u1: f64,
    #[serde(skip)]
    pub psi_star: Field,
    pub zeta_star: f64,
    pub xi_star: f64,
    pub eta1: f64,
    pub a1_residual: f64,
    pub a2_value: f64,
    /// `<l, T_lambda_u(u1, 0)[1]>`; its sign fixes stability at sigma = 0.
    pub stability_pairing: f64,
    /// `<l, T_uu(u1, 0)[1, psi*]> = d g(u1) (r0 + r1)`.
    pub precondition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gamma1Stability {
    Stable,
    Unstable,
}

/// Balance function whose roots locate bifurcation points on the constant line.
pub fn balance(grid: &Grid1D, model: &ModelSpec, u: f64) -> f64 {
    let fi = grid.integrate(&Field::from_fn(grid.len(), |i, _| model.f(grid.nodes[i], u)));
    u * fi + (1.0 + model.d * u) * model.g(u) * (model.r0 + model.r1)
}

/// All roots of the balance function in `[a, b]`.
pub fn find_u1(grid: &Grid1D, model: &ModelSpec, bracket: (f64, f64)) -> Result<Vec<f64>> {
    let (a, b) = bracket;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Validation("bracket must satisfy a < b".into()));
    }
    let phi = |u: f64| balance(grid, model, u);
    let m = 400;
    let mut roots = Vec::new();
    let mut xa = a;
    let mut fa = phi(a);
    for k in 1..=m {
        let xb = a + (b - a) * k as f64 / m as f64;
        let fb = phi(xb);
        if fa == 0.0 {
            roots.push(xa);
        } else if fa * fb < 0.0 {
            roots.push(bisect(&phi, xa, xb, fa));
        }
        xa = xb;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(b);
    }
    roots.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
    if roots.is_empty() {
        return Err(Error::NoSignChange);
    }
    Ok(roots)
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        let fc = f(c);
        if fc == 0.0 || (b - a) < 4.0 * f64::EPSILON * c.abs().max(1.0) {
            return c;
        }
        if fa * fc < 0.0 {
            b = c;
        } else {
            a = c;
            fa = fc;
        }
    }
    0.5 * (a + b)
}

/// Zero-mean solution of `(1 + d u1) v'' + u1 f(x, u1) = 0`, `d_n v = r g(u1)`.
pub fn solve_psi_star(grid: &Grid1D, model: &ModelSpec, u1: f64) -> Result<Field> {
    let n1 = grid.len();
    let n = grid.n;
    let h = grid.h;
    let c = 1.0 + model.d * u1;
    if c == 0.0 {
        return Err(Error::SingularBorderedSystem);
    }
    let lap = {
        let mut t = crate::tridiag::Tridiag::zeros(n1);
        let h2 = h * h;
        for i in 1..n {
            t.sub[i - 1] = 1.0 / h2;
            t.diag[i] = -2.0 / h2;
            t.sup[i] = 1.0 / h2;
        }
        t.diag[0] = -2.0 / h2;
        t.sup[0] = 2.0 / h2;
        t.diag[n] = -2.0 / h2;
        t.sub[n - 1] = 2.0 / h2;
        t.to_dense()
    };
    let g = model.g(u1);
    let mut rhs = DVector::from_fn(n1, |i, _| -u1 * model.f(grid.nodes[i], u1) / c);
    rhs[0] -= 2.0 * model.r0 * g / h;
    rhs[n] -= 2.0 * model.r1 * g / h;
    let mut mat = DMatrix::zeros(n1 + 1, n1 + 1);
    mat.view_mut((0, 0), (n1, n1)).copy_from(&lap);
    for i in 0..n1 {
        mat[(i, n1)] = 1.0;
        mat[(n1, i)] = grid.weights[i];
    }
    let mut b = DVector::zeros(n1 + 1);
    b.rows_mut(0, n1).copy_from(&rhs);
    let sol = mat.lu().solve(&b).ok_or(Error::SingularBorderedSystem)?;
    let defect = sol[n1];
    if defect.abs() > 1e-8 * (1.0 + rhs.amax() * h) {
        return Err(Error::SolvabilityViolated(defect));
    }
    Ok(sol.rows(0, n1).into_owned())
}

/// Weighted max-norm residual of the psi* equation.
pub fn psi_star_residual(grid: &Grid1D, model: &ModelSpec, u1: f64, psi: &Field) -> f64 {
    let g = model.g(u1);
    let lap = grid.laplacian(psi, model.r0 * g, model.r1 * g);
    let c = 1.0 + model.d * u1;
    let r = Field::from_fn(grid.len(), |i, _| c * lap[i] + u1 * model.f(grid.nodes[i], u1));
    crate::discrete::weighted_norm(grid, &r)
}

/// `<l, T_lambda_u(u1, 0)[1]>`.
pub fn stability_pairing(grid: &Grid1D, model: &ModelSpec, u1: f64) -> f64 {
    let x = &grid.nodes;
    grid.integrate(&Field::from_fn(grid.len(), |i, _| model.f(x[i], u1) + u1 * model.f_u(x[i], u1)))
        + (1.0 + model.d * u1) * model.g_u(u1) * (model.r0 + model.r1)
}

/// (zeta*, xi*, eta1); xi* doubles as the transversality value.
pub fn compute_eta1(grid: &Grid1D, model: &ModelSpec, u1: f64, psi: &Field) -> Result<(f64, f64, f64)> {
    let x = &grid.nodes;
    let n = grid.n;
    let g = model.g(u1);
    let q = (model.r0 * g, model.r1 * g);
    let c = 1.0 + model.d * u1;
    let (mem_z, mem_x) = if model.d == 0.0 {
        (0.0, 0.0)
    } else {
        (
            model.d * grid.integrate(&grid.flux_divergence(psi, psi, q, q)),
            model.d * grid.integrate(&grid.laplacian(psi, q.0, q.1)),
        )
    };
    let zeta = mem_z
        + grid.integrate(&Field::from_fn(grid.len(), |i, _| (model.f(x[i], u1) + u1 * model.f_u(x[i], u1)) * psi[i]))
        + c * model.g_u(u1) * (model.r0 * psi[0] + model.r1 * psi[n]);
    let xi = mem_x + stability_pairing(grid, model, u1);
    if xi.abs() < 1e-12 {
        return Err(Error::A2Violated(xi));
    }
    Ok((zeta, xi, -zeta / xi))
}

pub fn analyze(grid: &Grid1D, model: &ModelSpec, u1: f64) -> Result<Gamma1Data> {
    let a1_residual = balance(grid, model, u1);
    let psi_star = solve_psi_star(grid, model, u1)?;
    let (zeta_star, xi_star, eta1) = compute_eta1(grid, model, u1, &psi_star)?;
    Ok(Gamma1Data {
        u1,
        psi_star,
        zeta_star,
        xi_star,
        eta1,
        a1_residual,
        a2_value: xi_star,
        stability_pairing: stability_pairing(grid, model, u1),
        precondition: model.d * model.g(u1) * (model.r0 + model.r1),
    })
}

pub fn classify_gamma1_stability(data: &Gamma1Data, s: f64) -> Result<Gamma1Stability> {
    if data.precondition.abs() > 1e-10 * (1.0 + data.stability_pairing.abs()) {
        return Err(Error::PreconditionViolated(data.precondition));
    }
    if s * data.stability_pairing < 0.0 {
        Ok(Gamma1Stability::Stable)
    } else {
        Ok(Gamma1Stability::Unstable)
    }
}
