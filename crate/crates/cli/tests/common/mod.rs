#![allow(dead_code)]

use memdiff_core::{Expr, Grid1D, ModelSpec};
use memdiff_cli::RunConfig;

pub fn cos_profile() -> Expr {
    Expr::Sum { terms: vec![Expr::Cos { k: 1.0, amp: 1.0 }, Expr::constant(-0.2)] }
}

/// m = cos(pi x) - 0.2, g = u^2, r0 = r1 = -1.
pub fn cos_fixture(n: usize, d: f64) -> (Grid1D, ModelSpec) {
    (Grid1D::new(n, 1.0).unwrap(), ModelSpec::logistic(cos_profile(), -1.0, -1.0, d, 1.0).unwrap())
}

/// Same profile with r = 0 and strong memory: the Hopf fixture.
pub fn hopf_fixture(n: usize, d: f64) -> (Grid1D, ModelSpec) {
    (Grid1D::new(n, 1.0).unwrap(), ModelSpec::logistic(cos_profile(), 0.0, 0.0, d, 1.0).unwrap())
}

/// m = 1 + cos(pi x) / 2, r0 = r1 = -1/2: the balance root is u1 = 1/2.
pub fn unit_mean_fixture(n: usize) -> (Grid1D, ModelSpec) {
    let m = Expr::Sum { terms: vec![Expr::constant(1.0), Expr::Cos { k: 1.0, amp: 0.5 }] };
    (Grid1D::new(n, 1.0).unwrap(), ModelSpec::logistic(m, -0.5, -0.5, 0.0, 1.0).unwrap())
}

pub fn config(json: &str) -> RunConfig {
    memdiff_cli::config::parse(json).unwrap()
}

pub const COS_MODEL_JSON: &str = r#"{ "name": "logistic_heterogeneous",
  "m": { "kind": "sum", "terms": [ { "kind": "cos", "k": 1.0, "amp": 1.0 }, { "kind": "const", "value": -0.2 } ] } }"#;

/// Smallest positive lambda with `phi'' + lambda m phi = 0`, `phi'(0) = phi'(1) = 0`
/// and phi positive, by RK4 shooting and bisection on `phi'(1)`.
pub fn shooting_lambda1(m: impl Fn(f64) -> f64) -> f64 {
    let shoot = |lam: f64| -> (f64, f64) {
        let steps = 4000;
        let h = 1.0 / steps as f64;
        let (mut p, mut q) = (1.0_f64, 0.0_f64);
        let mut pmin = p;
        let rhs = |x: f64, p: f64, q: f64| (q, -lam * m(x) * p);
        for k in 0..steps {
            let x = k as f64 * h;
            let k1 = rhs(x, p, q);
            let k2 = rhs(x + h / 2.0, p + h / 2.0 * k1.0, q + h / 2.0 * k1.1);
            let k3 = rhs(x + h / 2.0, p + h / 2.0 * k2.0, q + h / 2.0 * k2.1);
            let k4 = rhs(x + h, p + h * k3.0, q + h * k3.1);
            p += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            q += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            pmin = pmin.min(p);
        }
        (q, pmin)
    };
    let mut a = 1e-3;
    let mut fa = shoot(a).0;
    loop {
        let b = a + 0.05;
        let fb = shoot(b).0;
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = shoot(mid).0;
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            let lam = 0.5 * (lo + hi);
            if shoot(lam).1 > 0.0 {
                return lam;
            }
        }
        a = b;
        fa = fb;
        assert!(a < 200.0, "no positive principal eigenvalue below 200");
    }
}

/// Limit of `r(h)` from samples at h, h/2, h/4 assuming `r = L + a h + b h^2`.
pub fn richardson3(r_h: f64, r_h2: f64, r_h4: f64) -> f64 {
    (8.0 * r_h4 - 6.0 * r_h2 + r_h) / 3.0
}

/// Observed order from three successive refinements (self-convergence).
pub fn observed_order(a: f64, b: f64, c: f64) -> f64 {
    ((a - b).abs() / (b - c).abs()).log2()
}
