//! Principal eigenpair of `-u'' = lambda f(x,0) u`, `d_n u = lambda r g_u(0) u`.
//!
//! After multiplying by the trapezoid weights the discrete problem is the
//! symmetric pencil `K v = lambda M v`, with `K` the stiffness matrix and `M`
//! the diagonal weight carrying both the interior and boundary parts.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::model::ModelSpec;
use crate::tridiag::Tridiag;

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub lambda1: f64,
    #[serde(skip)]
    pub phi1: Field,
    /// `|K phi - lambda M phi|_inf / |K phi|_inf`.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    /// Some positive interior or boundary weight exists.
    pub positive_weight: bool,
    /// Total weight is negative.
    pub negative_mean: bool,
    pub total_weight: f64,
}

impl Feasibility {
    pub fn ok(&self) -> bool {
        self.positive_weight && self.negative_mean
    }
}

/// Diagonal of the weight matrix `M`.
pub fn weight_diagonal(grid: &Grid1D, model: &ModelSpec) -> DVector<f64> {
    let n = grid.n;
    let mut m = DVector::from_fn(n + 1, |i, _| grid.weights[i] * model.f(grid.nodes[i], 0.0));
    let gu = model.g_u(0.0);
    m[0] += gu * model.r0;
    m[n] += gu * model.r1;
    m
}

pub fn check_eigen_feasibility(grid: &Grid1D, model: &ModelSpec) -> Feasibility {
    let gu = model.g_u(0.0);
    let positive_weight = grid.nodes.iter().any(|&x| model.f(x, 0.0) > 0.0) || model.r0 * gu > 0.0 || model.r1 * gu > 0.0;
    let total_weight = weight_diagonal(grid, model).sum();
    Feasibility { positive_weight, negative_mean: total_weight < 0.0, total_weight }
}

pub fn rayleigh_quotient(grid: &Grid1D, model: &ModelSpec, u: &Field) -> Result<f64> {
    let m = weight_diagonal(grid, model);
    let den: f64 = u.iter().zip(m.iter()).map(|(a, b)| a * a * b).sum();
    if !(den > 0.0) {
        return Err(Error::DenominatorNotPositive(den));
    }
    Ok(grid.dirichlet_energy(u) / den)
}

fn pencil_residual(k: &Tridiag, m: &DVector<f64>, lambda: f64, v: &Field) -> f64 {
    let kv = k.mul_vec(v);
    let r = &kv - m.component_mul(v) * lambda;
    r.amax() / kv.amax().max(f64::MIN_POSITIVE)
}

/// Positive principal eigenpair, normalised to unit quadrature norm and positive sign.
pub fn principal_eigenpair(grid: &Grid1D, model: &ModelSpec) -> Result<EigenPair> {
    let feas = check_eigen_feasibility(grid, model);
    if !feas.positive_weight {
        return Err(Error::FeasibilityViolated("weight f(x,0), r g_u(0) is nowhere positive".into()));
    }
    if !feas.negative_mean {
        return Err(Error::FeasibilityViolated(format!("total weight {} is not negative", feas.total_weight)));
    }
    let k = grid.stiffness();
    let kd = k.to_dense();
    let m = weight_diagonal(grid, model);
    let md = DMatrix::from_diagonal(&m);
    // K - eps M is positive definite for small eps > 0 because K >= 0 with
    // kernel span{1} and 1^T M 1 < 0.
    let mut eps = 1.0;
    let chol = loop {
        if let Some(c) = (&kd - &md * eps).cholesky() {
            break c;
        }
        eps *= 0.5;
        if eps < 1e-14 {
            return Err(Error::NoSignDefiniteEigenvector);
        }
    };
    let l = chol.l();
    let linv_m = l.solve_lower_triangular(&md).ok_or(Error::NoSignDefiniteEigenvector)?;
    let s = l.solve_lower_triangular(&linv_m.transpose()).ok_or(Error::NoSignDefiniteEigenvector)?;
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let lt = l.transpose();

    // nu = 1 / (lambda - eps)
    let mut cands: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &nu)| nu != 0.0)
        .map(|(j, &nu)| (eps + 1.0 / nu, j))
        .filter(|(lam, _)| *lam > 1e-12)
        .collect();
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    for (lam, j) in cands {
        let y = eig.eigenvectors.column(j).into_owned();
        let Some(v) = lt.solve_upper_triangular(&y) else { continue };
        let v = inverse_iterate(&kd, &md, lam, v);
        let vmax = v.amax();
        let pos = v.iter().all(|&c| c >= -1e-10 * vmax);
        let neg = v.iter().all(|&c| c <= 1e-10 * vmax);
        if !(pos || neg) {
            continue;
        }
        let mut phi = if neg { -v } else { v };
        let nrm = grid.norm(&phi);
        phi /= nrm;
        let (lam, phi) = polish(grid, &k, &m, lam, phi);
        if phi.iter().any(|&c| c <= 0.0) {
            continue;
        }
        let den: f64 = phi.iter().zip(m.iter()).map(|(a, b)| a * a * b).sum();
        if !(den > 0.0) || lam <= 1e-8 {
            // the constant mode at lambda = 0 when r g_u(0) vanishes
            continue;
        }
        let residual_norm = pencil_residual(&k, &m, lam, &phi);
        return Ok(EigenPair { lambda1: lam, phi1: phi, residual_norm });
    }
    Err(Error::NoSignDefiniteEigenvector)
}

/// Shifted inverse iteration; separates near-degenerate pairs the transformed solve can mix.
fn inverse_iterate(kd: &DMatrix<f64>, md: &DMatrix<f64>, lam: f64, mut v: Field) -> Field {
    let shift = lam * (1.0 - 1e-10);
    let lu = (kd - md * shift).lu();
    for _ in 0..3 {
        let Some(w) = lu.solve(&(md * &v)) else { break };
        let nrm = w.amax();
        if !(nrm.is_finite() && nrm > 0.0) {
            break;
        }
        v = w / nrm;
    }
    v
}

/// Newton refinement on `(K - lambda M) v = 0`, `<v, v> = 1`.
fn polish(grid: &Grid1D, k: &Tridiag, m: &DVector<f64>, mut lam: f64, mut v: Field) -> (f64, Field) {
    let n1 = v.len();
    let kd = k.to_dense();
    for _ in 0..3 {
        let mv = m.component_mul(&v);
        let r = k.mul_vec(&v) - &mv * lam;
        let nr = 0.5 * (grid.inner(&v, &v) - 1.0);
        let mut jac = DMatrix::zeros(n1 + 1, n1 + 1);
        jac.view_mut((0, 0), (n1, n1)).copy_from(&(&kd - DMatrix::from_diagonal(m) * lam));
        for i in 0..n1 {
            jac[(i, n1)] = -mv[i];
            jac[(n1, i)] = grid.weights[i] * v[i];
        }
        let mut rhs = DVector::zeros(n1 + 1);
        rhs.rows_mut(0, n1).copy_from(&(-r));
        rhs[n1] = -nr;
        let Some(step) = jac.lu().solve(&rhs) else { break };
        v += step.rows(0, n1);
        lam += step[n1];
        if step.amax() < 1e-15 {
            break;
        }
    }
    (lam, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Expr;

    fn cos_fixture(n: usize) -> (Grid1D, ModelSpec) {
        let m = Expr::Sum { terms: vec![Expr::Cos { k: 1.0, amp: 1.0 }, Expr::constant(-0.2)] };
        (Grid1D::new(n, 1.0).unwrap(), ModelSpec::logistic(m, -1.0, -1.0, 0.0, 1.0).unwrap())
    }

    #[test]
    fn feasibility_examples() {
        let (g, m) = cos_fixture(64);
        let f = check_eigen_feasibility(&g, &m);
        assert!(f.ok());
        let neg = ModelSpec::logistic(Expr::constant(-1.0), -1.0, -1.0, 0.0, 1.0).unwrap();
        assert!(!check_eigen_feasibility(&g, &neg).positive_weight);
        let pos = ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.0, 1.0).unwrap();
        assert!(!check_eigen_feasibility(&g, &pos).negative_mean);
        assert!(matches!(principal_eigenpair(&g, &pos), Err(Error::FeasibilityViolated(_))));
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let g = Grid1D::new(32, 1.0).unwrap();
        let one = Field::from_element(33, 1.0);
        assert!(g.stiffness().mul_vec(&one).amax() < 1e-12);
    }

    #[test]
    fn eigenpair_identities() {
        let (g, m) = cos_fixture(128);
        let e = principal_eigenpair(&g, &m).unwrap();
        assert!(e.residual_norm <= 1e-10, "{}", e.residual_norm);
        assert!(e.phi1.iter().all(|&v| v > 0.0));
        assert!((g.norm(&e.phi1) - 1.0).abs() < 1e-12);
        let q = rayleigh_quotient(&g, &m, &e.phi1).unwrap();
        assert!((q - e.lambda1).abs() < 1e-8 * e.lambda1);
    }

    #[test]
    fn even_weight_gives_even_eigenfunction() {
        let prof = Expr::Sum { terms: vec![Expr::Cos { k: 2.0, amp: 1.0 }, Expr::constant(-0.3)] };
        let g = Grid1D::new(64, 1.0).unwrap();
        let m = ModelSpec::logistic(prof, -1.0, -1.0, 0.0, 1.0).unwrap();
        let e = principal_eigenpair(&g, &m).unwrap();
        for i in 0..=64 {
            assert!((e.phi1[i] - e.phi1[64 - i]).abs() < 1e-8);
        }
    }

    #[test]
    fn rayleigh_rejects_nonpositive_denominator() {
        let (g, m) = cos_fixture(32);
        let u = g.sample(|x| if x > 0.7 { 1.0 } else { 0.0 });
        assert!(matches!(rayleigh_quotient(&g, &m, &u), Err(Error::DenominatorNotPositive(_))));
    }
}
