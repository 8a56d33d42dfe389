//! Discrete right-hand side of the delayed equation and its derivatives.
//!
//! `R(u, w)` is the semi-discrete right-hand side with current state `u` and
//! delayed state `w`. Boundary conditions enter through ghost nodes, so the
//! steady problem is `R(u, u) = 0` and the delay equation is
//! `u' = R(u(t), u(t - sigma))`.

use crate::grid::{Field, Grid1D};
use crate::model::ModelSpec;
use crate::tridiag::Tridiag;

/// Outward normal derivatives (x = 0, x = L) imposed by the boundary condition.
pub fn boundary_fluxes(model: &ModelSpec, lambda: f64, u: &Field) -> (f64, f64) {
    let n = u.len() - 1;
    (lambda * model.r0 * model.g(u[0]), lambda * model.r1 * model.g(u[n]))
}

pub fn residual(grid: &Grid1D, model: &ModelSpec, lambda: f64, u: &Field, w: &Field) -> Field {
    let qu = boundary_fluxes(model, lambda, u);
    let mut out = grid.laplacian(u, qu.0, qu.1);
    if model.d != 0.0 {
        let qw = boundary_fluxes(model, lambda, w);
        out += grid.flux_divergence(u, w, qu, qw) * model.d;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o += lambda * u[i] * model.f(grid.nodes[i], u[i]);
    }
    out
}

pub fn steady_residual(grid: &Grid1D, model: &ModelSpec, lambda: f64, u: &Field) -> Field {
    residual(grid, model, lambda, u, u)
}

/// Quadrature-weighted max norm, the residual of the weak form.
pub fn weighted_norm(grid: &Grid1D, r: &Field) -> f64 {
    r.iter().zip(&grid.weights).fold(0.0_f64, |m, (v, w)| m.max((v * w).abs()))
}

/// Derivative of `R` with respect to the current state.
pub fn jacobian_current(grid: &Grid1D, model: &ModelSpec, lambda: f64, u: &Field, w: &Field) -> Tridiag {
    let n = grid.n;
    let h = grid.h;
    let h2 = h * h;
    let mut t = Tridiag::zeros(n + 1);
    // d q / d u_b at each end
    let dg0 = 2.0 * h * lambda * model.r0 * model.g_u(u[0]);
    let dgn = 2.0 * h * lambda * model.r1 * model.g_u(u[n]);

    for i in 1..n {
        t.sub[i - 1] += 1.0 / h2;
        t.diag[i] += -2.0 / h2;
        t.sup[i] += 1.0 / h2;
    }
    t.diag[0] += (-2.0 + dg0) / h2;
    t.sup[0] += 2.0 / h2;
    t.diag[n] += (-2.0 + dgn) / h2;
    t.sub[n - 1] += 2.0 / h2;

    if model.d != 0.0 {
        let d = model.d;
        let qw = boundary_fluxes(model, lambda, w);
        let (wl, wr) = grid.ghosts(w, qw.0, qw.1);
        let we = |i: isize| -> f64 {
            if i < 0 {
                wl
            } else if i as usize > n {
                wr
            } else {
                w[i as usize]
            }
        };
        for i in 0..=n {
            let ii = i as isize;
            let dp = we(ii + 1) - we(ii);
            let dm = we(ii) - we(ii - 1);
            let c_next = d * dp / (2.0 * h2);
            let c_prev = -d * dm / (2.0 * h2);
            t.diag[i] += d * (dp - dm) / (2.0 * h2);
            if i == 0 {
                t.sup[0] += c_next + c_prev;
                t.diag[0] += c_prev * dg0;
            } else if i == n {
                t.sub[n - 1] += c_prev + c_next;
                t.diag[n] += c_next * dgn;
            } else {
                t.sup[i] += c_next;
                t.sub[i - 1] += c_prev;
            }
        }
    }

    for i in 0..=n {
        let x = grid.nodes[i];
        t.diag[i] += lambda * (model.f(x, u[i]) + u[i] * model.f_u(x, u[i]));
    }
    t
}

/// Derivative of `R` with respect to the delayed state.
pub fn jacobian_delayed(grid: &Grid1D, model: &ModelSpec, lambda: f64, u: &Field, w: &Field) -> Tridiag {
    let n = grid.n;
    let h = grid.h;
    let h2 = h * h;
    let mut t = Tridiag::zeros(n + 1);
    if model.d == 0.0 {
        return t;
    }
    let d = model.d;
    let qu = boundary_fluxes(model, lambda, u);
    let (ul, ur) = grid.ghosts(u, qu.0, qu.1);
    let ue = |i: isize| -> f64 {
        if i < 0 {
            ul
        } else if i as usize > n {
            ur
        } else {
            u[i as usize]
        }
    };
    let dg0 = 2.0 * h * lambda * model.r0 * model.g_u(w[0]);
    let dgn = 2.0 * h * lambda * model.r1 * model.g_u(w[n]);
    for i in 0..=n {
        let ii = i as isize;
        let ap = d * 0.5 * (ue(ii) + ue(ii + 1)) / h2;
        let am = d * 0.5 * (ue(ii) + ue(ii - 1)) / h2;
        t.diag[i] -= ap + am;
        if i == 0 {
            t.sup[0] += ap + am;
            t.diag[0] += am * dg0;
        } else if i == n {
            t.sub[n - 1] += am + ap;
            t.diag[n] += ap * dgn;
        } else {
            t.sup[i] += ap;
            t.sub[i - 1] += am;
        }
    }
    t
}

/// Jacobian of the steady residual `R(u, u)`.
pub fn steady_jacobian(grid: &Grid1D, model: &ModelSpec, lambda: f64, u: &Field) -> Tridiag {
    let a = jacobian_current(grid, model, lambda, u, u);
    let b = jacobian_delayed(grid, model, lambda, u, u);
    a.axpy(1.0, &b)
}

/// Maps a pair (interior field y1, boundary pair y2) to the single nodal
/// vector used by the ghost-eliminated equations: boundary rows pick up
/// `-(2/h) y2`.
pub fn collapse(grid: &Grid1D, y1: &Field, y2: (f64, f64)) -> Field {
    let mut out = y1.clone();
    out[0] -= 2.0 * y2.0 / grid.h;
    out[grid.n] -= 2.0 * y2.1 / grid.h;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BuiltinModel, Expr};

    fn model(d: f64) -> ModelSpec {
        ModelSpec::builtin(
            BuiltinModel::SaturatingBistableBoundary {
                r: Expr::Sum { terms: vec![Expr::constant(1.0), Expr::Cos { k: 1.0, amp: 0.5 }] },
                k: 1.5,
                gamma: Expr::constant(0.4),
                a: 0.3,
            },
            -0.7,
            -1.2,
            d,
            1.0,
        )
        .unwrap()
    }

    fn fd_column_check(jac: &Tridiag, f: impl Fn(&Field) -> Field, x: &Field) {
        let dense = jac.to_dense();
        let n = x.len();
        for j in 0..n {
            let eps = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += eps;
            xm[j] -= eps;
            let col = (f(&xp) - f(&xm)) / (2.0 * eps);
            let exact = dense.column(j).into_owned();
            let scale = exact.amax().max(1.0);
            assert!((col - exact).amax() < 1e-5 * scale, "column {j}");
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let g = Grid1D::new(16, 1.0).unwrap();
        let m = model(0.6);
        let u = g.sample(|x| 0.4 + 0.2 * (3.0 * x).sin());
        let w = g.sample(|x| 0.5 - 0.1 * x * x);
        let lam = 2.3;
        let a = jacobian_current(&g, &m, lam, &u, &w);
        fd_column_check(&a, |v| residual(&g, &m, lam, v, &w), &u);
        let b = jacobian_delayed(&g, &m, lam, &u, &w);
        fd_column_check(&b, |v| residual(&g, &m, lam, &u, v), &w);
        let j = steady_jacobian(&g, &m, lam, &u);
        fd_column_check(&j, |v| steady_residual(&g, &m, lam, v), &u);
    }

    #[test]
    fn no_memory_means_no_delayed_part() {
        let g = Grid1D::new(16, 1.0).unwrap();
        let m = model(0.0);
        let u = g.sample(|x| 0.4 + x);
        let b = jacobian_delayed(&g, &m, 1.0, &u, &u);
        assert!(b.diag.iter().chain(&b.sub).chain(&b.sup).all(|v| *v == 0.0));
    }

    #[test]
    fn zero_is_a_solution() {
        let g = Grid1D::new(16, 1.0).unwrap();
        let m = model(0.3);
        let z = Field::zeros(17);
        assert_eq!(steady_residual(&g, &m, 3.0, &z).amax(), 0.0);
    }
}
