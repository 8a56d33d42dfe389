//! Uniform 1-D grid, trapezoid quadrature and ghost-node difference operators.
//!
//! Boundary data are always given as outward normal derivatives: at x = 0 the
//! outward normal derivative is -u'(0), at x = L it is u'(L).

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Nodal values on the grid, length N + 1.
pub type Field = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub length: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
    /// Trapezoid weights.
    pub weights: Vec<f64>,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("grid needs N >= 2, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Validation(format!("domain length must be positive, got {length}")));
        }
        let h = length / n as f64;
        let nodes = (0..=n).map(|i| i as f64 * h).collect();
        let mut weights = vec![h; n + 1];
        weights[0] = 0.5 * h;
        weights[n] = 0.5 * h;
        Ok(Self { n, length, h, nodes, weights })
    }

    /// Number of nodes, N + 1.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_iterator(self.len(), self.nodes.iter().map(|&x| f(x)))
    }

    pub fn integrate(&self, u: &Field) -> f64 {
        u.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Quadrature inner product.
    pub fn inner(&self, a: &Field, b: &Field) -> f64 {
        a.iter().zip(b.iter()).zip(&self.weights).map(|((p, q), w)| p * q * w).sum()
    }

    pub fn norm(&self, u: &Field) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Sum of `r0 * u(0) + r1 * u(L)`, the boundary "integral" in 1-D.
    pub fn boundary_sum(&self, u: &Field, r0: f64, r1: f64) -> f64 {
        r0 * u[0] + r1 * u[self.n]
    }

    /// Ghost values implied by outward normal derivatives `q0`, `q1`.
    pub fn ghosts(&self, u: &Field, q0: f64, q1: f64) -> (f64, f64) {
        let n = self.n;
        (u[1] + 2.0 * self.h * q0, u[n - 1] + 2.0 * self.h * q1)
    }

    /// Second-order Laplacian with prescribed outward normal derivatives.
    pub fn laplacian(&self, u: &Field, q0: f64, q1: f64) -> Field {
        let n = self.n;
        let h2 = self.h * self.h;
        let (gl, gr) = self.ghosts(u, q0, q1);
        let mut out = Field::zeros(n + 1);
        out[0] = (u[1] - 2.0 * u[0] + gl) / h2;
        for i in 1..n {
            out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
        }
        out[n] = (gr - 2.0 * u[n] + u[n - 1]) / h2;
        out
    }

    /// Conservative discretisation of div(u grad w) with arithmetic-mean face
    /// coefficients. `qu` and `qw` are the outward normal derivatives of `u`
    /// and `w` at (x = 0, x = L), used to build the ghost values.
    pub fn flux_divergence(&self, u: &Field, w: &Field, qu: (f64, f64), qw: (f64, f64)) -> Field {
        let n = self.n;
        let h2 = self.h * self.h;
        let (ul, ur) = self.ghosts(u, qu.0, qu.1);
        let (wl, wr) = self.ghosts(w, qw.0, qw.1);
        let ue = |i: isize| -> f64 {
            if i < 0 {
                ul
            } else if i as usize > n {
                ur
            } else {
                u[i as usize]
            }
        };
        let we = |i: isize| -> f64 {
            if i < 0 {
                wl
            } else if i as usize > n {
                wr
            } else {
                w[i as usize]
            }
        };
        let mut out = Field::zeros(n + 1);
        for i in 0..=n as isize {
            let ap = 0.5 * (ue(i) + ue(i + 1));
            let am = 0.5 * (ue(i) + ue(i - 1));
            out[i as usize] = (ap * (we(i + 1) - we(i)) - am * (we(i) - we(i - 1))) / h2;
        }
        out
    }

    /// Exact discrete boundary flux of [`Grid1D::flux_divergence`]: the
    /// trapezoid integral of the divergence equals this value.
    pub fn flux_divergence_boundary(&self, u: &Field, w: &Field, qu: (f64, f64), qw: (f64, f64)) -> f64 {
        let n = self.n;
        let h = self.h;
        let (ul, ur) = self.ghosts(u, qu.0, qu.1);
        let am = 0.5 * (ul + u[0]);
        let a0 = 0.5 * (u[0] + u[1]);
        let left = am * qw.0 + (am - a0) * (w[1] - w[0]) / (2.0 * h);
        let ap = 0.5 * (u[n] + ur);
        let an = 0.5 * (u[n - 1] + u[n]);
        let right = ap * qw.1 + (ap - an) * (w[n - 1] - w[n]) / (2.0 * h);
        left + right
    }

    /// Stiffness matrix of the discrete Dirichlet form: `u^T K u` is the sum of
    /// h * ((u[i+1]-u[i]) / h)^2 over cells.
    pub fn stiffness(&self) -> crate::tridiag::Tridiag {
        let n = self.n;
        let k = 1.0 / self.h;
        let mut diag = vec![2.0 * k; n + 1];
        diag[0] = k;
        diag[n] = k;
        crate::tridiag::Tridiag { sub: vec![-k; n], diag, sup: vec![-k; n] }
    }

    /// Dirichlet energy on the staggered gradient.
    pub fn dirichlet_energy(&self, u: &Field) -> f64 {
        u.as_slice().windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>() / self.h
    }

    pub fn max_abs(u: &Field) -> f64 {
        u.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn trapezoid_x_squared() {
        let g = Grid1D::new(64, 1.0).unwrap();
        let v = g.integrate(&g.sample(|x| x * x));
        assert!((v - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn laplacian_of_quadratic_is_exact() {
        let g = Grid1D::new(32, 1.0).unwrap();
        let l = g.laplacian(&g.sample(|x| x * x), 0.0, 2.0);
        for v in l.iter() {
            assert!((v - 2.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn laplacian_cosine_second_order() {
        let err = |n: usize| {
            let g = Grid1D::new(n, 1.0).unwrap();
            let l = g.laplacian(&g.sample(|x| (PI * x).cos()), 0.0, 0.0);
            let exact = g.sample(|x| -PI * PI * (PI * x).cos());
            Grid1D::max_abs(&(l - exact))
        };
        let slope = (err(32) / err(64)).log2();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn divergence_theorem_is_exact() {
        let g = Grid1D::new(40, 2.0).unwrap();
        let u = g.sample(|x| (1.3 * x).sin() + x * x * x);
        let l = g.laplacian(&u, 0.7, -1.1);
        assert!((g.integrate(&l) - (0.7 - 1.1)).abs() < 1e-11);
    }

    #[test]
    fn flux_divergence_boundary_matches_integral() {
        let g = Grid1D::new(50, 1.0).unwrap();
        let u = g.sample(|x| 1.0 + 0.3 * x);
        let w = g.sample(|x| (2.0 * x).cos());
        let (qu, qw) = ((0.2, -0.4), (0.5, 0.1));
        let div = g.flux_divergence(&u, &w, qu, qw);
        let b = g.flux_divergence_boundary(&u, &w, qu, qw);
        assert!((g.integrate(&div) - b).abs() < 1e-11);
    }

    #[test]
    fn flux_divergence_reduces_to_laplacian_for_unit_coefficient() {
        let g = Grid1D::new(30, 1.0).unwrap();
        let one = Field::from_element(31, 1.0);
        let w = g.sample(|x| (3.0 * x).sin());
        let a = g.flux_divergence(&one, &w, (0.0, 0.0), (0.3, 0.2));
        let b = g.laplacian(&w, 0.3, 0.2);
        assert!(Grid1D::max_abs(&(a - b)) < 1e-9);
    }

    #[test]
    fn stiffness_is_dirichlet_energy() {
        let g = Grid1D::new(20, 1.5).unwrap();
        let u = g.sample(|x| (x * 2.0).exp());
        let ku = g.stiffness().mul_vec(&u);
        assert!((u.dot(&ku) - g.dirichlet_energy(&u)).abs() < 1e-9);
    }
}
