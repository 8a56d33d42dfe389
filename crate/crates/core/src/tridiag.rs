//! Tridiagonal matrices over real and complex scalars.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Row i reads `sub[i-1] x[i-1] + diag[i] x[i] + sup[i] x[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Self {
        Self { sub: vec![0.0; n - 1], diag: vec![0.0; n], sup: vec![0.0; n - 1] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            s
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.sup[i];
                m[(i + 1, i)] = self.sub[i];
            }
        }
        m
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            sub: self.sub.iter().map(|v| v * a).collect(),
            diag: self.diag.iter().map(|v| v * a).collect(),
            sup: self.sup.iter().map(|v| v * a).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Tridiag) -> Self {
        let f = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x + a * y).collect();
        Self { sub: f(&self.sub, &other.sub), diag: f(&self.diag, &other.diag), sup: f(&self.sup, &other.sup) }
    }

    /// Thomas algorithm. Returns `None` on a vanishing pivot.
    pub fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.dim();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        if n > 1 {
            c[0] = self.sup[0] / piv;
        }
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.sub[i - 1] * c[i - 1];
            if piv == 0.0 || !piv.is_finite() {
                return None;
            }
            if i + 1 < n {
                c[i] = self.sup[i] / piv;
            }
            d[i] = (rhs[i] - self.sub[i - 1] * d[i - 1]) / piv;
        }
        let mut x = DVector::zeros(n);
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        Some(x)
    }
}

/// Complex tridiagonal matrix, same layout as [`Tridiag`].
#[derive(Debug, Clone)]
pub struct CTridiag {
    pub sub: Vec<Complex64>,
    pub diag: Vec<Complex64>,
    pub sup: Vec<Complex64>,
}

impl CTridiag {
    /// `a * A + b * B + c * I`.
    pub fn combine(a: Complex64, ma: &Tridiag, b: Complex64, mb: &Tridiag, c: Complex64) -> Self {
        let f = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| a * x + b * y).collect::<Vec<_>>();
        let mut diag = f(&ma.diag, &mb.diag);
        for v in diag.iter_mut() {
            *v += c;
        }
        Self { sub: f(&ma.sub, &mb.sub), diag, sup: f(&ma.sup, &mb.sup) }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            s
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            sub: self.sup.iter().map(|v| v.conj()).collect(),
            diag: self.diag.iter().map(|v| v.conj()).collect(),
            sup: self.sub.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn solve(&self, rhs: &DVector<Complex64>) -> Option<DVector<Complex64>> {
        let n = self.dim();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        let mut piv = self.diag[0];
        if piv.norm() == 0.0 {
            return None;
        }
        if n > 1 {
            c[0] = self.sup[0] / piv;
        }
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.sub[i - 1] * c[i - 1];
            if piv.norm() == 0.0 || !piv.re.is_finite() || !piv.im.is_finite() {
                return None;
            }
            if i + 1 < n {
                c[i] = self.sup[i] / piv;
            }
            d[i] = (rhs[i] - self.sub[i - 1] * d[i - 1]) / piv;
        }
        let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        Some(x)
    }

    /// Logarithm of the determinant from an LU factorisation with partial
    /// pivoting. The imaginary part is only meaningful modulo 2 pi.
    pub fn log_det(&self) -> Complex64 {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut du = self.sup.clone();
        let dl = &self.sub;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n - 1 {
            if d[i].norm() >= dl[i].norm() {
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - fact * d[i + 1];
                if i + 2 < n {
                    du[i + 1] = -fact * du[i + 1];
                }
                acc += Complex64::new(0.0, std::f64::consts::PI);
            }
            acc += d[i].ln();
        }
        acc + d[n - 1].ln()
    }

    /// `log det(self)` together with `d/dt log det(self + t D)` at t = 0.
    pub fn log_det_with_derivative(&self, dm: &CTridiag) -> (Complex64, Complex64) {
        let n = self.dim();
        let mut r = self.diag[0];
        let mut dr = dm.diag[0];
        let mut acc = r.ln();
        let mut dacc = dr / r;
        for i in 1..n {
            let bc = self.sub[i - 1] * self.sup[i - 1];
            let dbc = dm.sub[i - 1] * self.sup[i - 1] + self.sub[i - 1] * dm.sup[i - 1];
            let nr = self.diag[i] - bc / r;
            let ndr = dm.diag[i] - (dbc * r - bc * dr) / (r * r);
            r = nr;
            dr = ndr;
            acc += r.ln();
            dacc += dr / r;
        }
        (acc, dacc)
    }
}
