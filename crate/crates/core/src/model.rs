//! Reaction terms f(x, u), boundary terms g(u) and model parameters.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial profile built from a small closed set of terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expr {
    Const { value: f64 },
    /// `c0 + c1 x + c2 x^2 + ...`
    Poly { coeffs: Vec<f64> },
    /// `amp * cos(k pi x / L)`
    Cos { k: f64, amp: f64 },
    /// `amp * sin(k pi x / L)`
    Sin { k: f64, amp: f64 },
    Sum { terms: Vec<Expr> },
    Product { factors: Vec<Expr> },
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Expr::Const { value } => *value,
            Expr::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Expr::Cos { k, amp } => amp * (k * PI * x / length).cos(),
            Expr::Sin { k, amp } => amp * (k * PI * x / length).sin(),
            Expr::Sum { terms } => terms.iter().map(|t| t.eval(x, length)).sum(),
            Expr::Product { factors } => factors.iter().map(|t| t.eval(x, length)).product(),
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |v: f64| !v.is_finite();
        match self {
            Expr::Const { value } if bad(*value) => Err(Error::Validation("non-finite constant".into())),
            Expr::Poly { coeffs } if coeffs.iter().any(|c| bad(*c)) => {
                Err(Error::Validation("non-finite polynomial coefficient".into()))
            }
            Expr::Cos { k, amp } | Expr::Sin { k, amp } if bad(*k) || bad(*amp) => {
                Err(Error::Validation("non-finite trigonometric term".into()))
            }
            Expr::Sum { terms: v } | Expr::Product { factors: v } => v.iter().try_for_each(Expr::check),
            _ => Ok(()),
        }
    }
}

/// Built-in (f, g) pairs with closed-form derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BuiltinModel {
    /// f = m(x) - u, g = u^2.
    LogisticHeterogeneous { m: Expr },
    /// f = r(x) (k - u) / (k + gamma(x) u), g = u (u - a)(1 - u).
    SaturatingBistableBoundary { r: Expr, k: f64, gamma: Expr, a: f64 },
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type BoundaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied model. Missing derivatives fall back to central differences.
#[derive(Clone)]
pub struct CustomModel {
    pub f: ScalarFn,
    pub f_u: Option<ScalarFn>,
    pub f_uu: Option<ScalarFn>,
    pub g: BoundaryFn,
    pub g_u: Option<BoundaryFn>,
    pub g_uu: Option<BoundaryFn>,
    pub g_uuu: Option<BoundaryFn>,
}

impl CustomModel {
    pub fn new(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), f_u: None, f_uu: None, g: Arc::new(g), g_u: None, g_uu: None, g_uuu: None }
    }

    pub fn uses_fd_fallback(&self) -> bool {
        self.f_u.is_none() || self.f_uu.is_none() || self.g_u.is_none() || self.g_uu.is_none() || self.g_uuu.is_none()
    }
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel").field("fd_fallback", &self.uses_fd_fallback()).finish()
    }
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    Builtin(BuiltinModel),
    Custom(CustomModel),
}

/// Finite-difference step for a derivative of the given order.
fn fd_step(order: u32, u: f64) -> f64 {
    let base = match order {
        1 => 1e-5,
        2 => 1e-4,
        _ => 1e-3,
    };
    base * u.abs().max(1.0)
}

fn d1(f: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = fd_step(1, u);
    (f(u + h) - f(u - h)) / (2.0 * h)
}

fn d2(f: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = fd_step(2, u);
    (f(u + h) - 2.0 * f(u) + f(u - h)) / (h * h)
}

fn d3(f: impl Fn(f64) -> f64, u: f64) -> f64 {
    let h = fd_step(3, u);
    (f(u + 2.0 * h) - 2.0 * f(u + h) + 2.0 * f(u - h) - f(u - 2.0 * h)) / (2.0 * h * h * h)
}

/// Complete model: nonlinearities, boundary coefficients, memory strength and domain length.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub r0: f64,
    pub r1: f64,
    pub d: f64,
    pub length: f64,
}

impl ModelSpec {
    pub fn builtin(model: BuiltinModel, r0: f64, r1: f64, d: f64, length: f64) -> Result<Self> {
        let spec = Self { kind: ModelKind::Builtin(model), r0, r1, d, length };
        spec.validate()?;
        Ok(spec)
    }

    pub fn custom(model: CustomModel, r0: f64, r1: f64, d: f64, length: f64) -> Result<Self> {
        let spec = Self { kind: ModelKind::Custom(model), r0, r1, d, length };
        spec.validate()?;
        Ok(spec)
    }

    pub fn logistic(m: Expr, r0: f64, r1: f64, d: f64, length: f64) -> Result<Self> {
        Self::builtin(BuiltinModel::LogisticHeterogeneous { m }, r0, r1, d, length)
    }

    pub fn with_d(&self, d: f64) -> Self {
        Self { d, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r0", self.r0), ("r1", self.r1), ("d", self.d)] {
            if !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be finite")));
            }
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::Validation("domain length must be positive".into()));
        }
        if let ModelKind::Builtin(b) = &self.kind {
            match b {
                BuiltinModel::LogisticHeterogeneous { m } => m.check()?,
                BuiltinModel::SaturatingBistableBoundary { r, k, gamma, a } => {
                    r.check()?;
                    gamma.check()?;
                    if !(*k > 0.0) || !a.is_finite() {
                        return Err(Error::Validation("saturating model needs k > 0 and finite a".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn uses_fd_fallback(&self) -> bool {
        matches!(&self.kind, ModelKind::Custom(c) if c.uses_fd_fallback())
    }

    pub fn f(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Builtin(BuiltinModel::LogisticHeterogeneous { m }) => m.eval(x, self.length) - u,
            ModelKind::Builtin(BuiltinModel::SaturatingBistableBoundary { r, k, gamma, .. }) => {
                r.eval(x, self.length) * (k - u) / (k + gamma.eval(x, self.length) * u)
            }
            ModelKind::Custom(c) => (c.f)(x, u),
        }
    }

    pub fn f_u(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Builtin(BuiltinModel::LogisticHeterogeneous { .. }) => -1.0,
            ModelKind::Builtin(BuiltinModel::SaturatingBistableBoundary { r, k, gamma, .. }) => {
                let gm = gamma.eval(x, self.length);
                -r.eval(x, self.length) * k * (1.0 + gm) / (k + gm * u).powi(2)
            }
            ModelKind::Custom(c) => match &c.f_u {
                Some(df) => df(x, u),
                None => d1(|v| (c.f)(x, v), u),
            },
        }
    }

    pub fn f_uu(&self, x: f64, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Builtin(BuiltinModel::LogisticHeterogeneous { .. }) => 0.0,
            ModelKind::Builtin(BuiltinModel::SaturatingBistableBoundary { r, k, gamma, .. }) => {
                let gm = gamma.eval(x, self.length);
                2.0 * r.eval(x, self.length) * k * gm * (1.0 + gm) / (k + gm * u).powi(3)
            }
            ModelKind::Custom(c) => match &c.f_uu {
                Some(df) => df(x, u),
                None => d2(|v| (c.f)(x, v), u),
            },
        }
    }

    pub fn g(&self, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Builtin(BuiltinModel::LogisticHeterogeneous { .. }) => u * u,
            ModelKind::Builtin(BuiltinModel::SaturatingBistableBoundary { a, .. }) => u * (u - a) * (1.0 - u),
            ModelKind::Custom(c) => (c.g)(u),
        }
    }

    pub fn g_u(&self, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Builtin(BuiltinModel::LogisticHeterogeneous { .. }) => 2.0 * u,
            ModelKind::Builtin(BuiltinModel::SaturatingBistableBoundary { a, .. }) => {
                -3.0 * u * u + 2.0 * (1.0 + a) * u - a
            }
            ModelKind::Custom(c) => match &c.g_u {
                Some(dg) => dg(u),
                None => d1(|v| (c.g)(v), u),
            },
        }
    }

    pub fn g_uu(&self, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Builtin(BuiltinModel::LogisticHeterogeneous { .. }) => 2.0,
            ModelKind::Builtin(BuiltinModel::SaturatingBistableBoundary { a, .. }) => -6.0 * u + 2.0 * (1.0 + a),
            ModelKind::Custom(c) => match &c.g_uu {
                Some(dg) => dg(u),
                None => d2(|v| (c.g)(v), u),
            },
        }
    }

    pub fn g_uuu(&self, u: f64) -> f64 {
        match &self.kind {
            ModelKind::Builtin(BuiltinModel::LogisticHeterogeneous { .. }) => 0.0,
            ModelKind::Builtin(BuiltinModel::SaturatingBistableBoundary { .. }) => -6.0,
            ModelKind::Custom(c) => match &c.g_uuu {
                Some(dg) => dg(u),
                None => d3(|v| (c.g)(v), u),
            },
        }
    }

    /// Boundary coefficient at the left (`false`) or right (`true`) end.
    pub fn r_at(&self, right: bool) -> f64 {
        if right {
            self.r1
        } else {
            self.r0
        }
    }

    /// Sampled sign check of `r g(u) <= 0` for u in [0, u_max]. Returns the
    /// offending (u, r g(u)) samples; empty means the check passed.
    pub fn check_a0(&self, u_max: f64, samples: usize) -> Vec<A0Violation> {
        let mut out = Vec::new();
        for j in 0..samples {
            let u = u_max * j as f64 / (samples.max(2) - 1) as f64;
            let gu = self.g(u);
            for (end, r) in [(0u8, self.r0), (1u8, self.r1)] {
                let v = r * gu;
                if v > 1e-14 {
                    out.push(A0Violation { u, end, value: v });
                }
            }
        }
        out
    }

    /// `|d| < 1 / max u*`.
    pub fn check_a3(&self, max_u: f64) -> bool {
        self.d.abs() * max_u < 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A0Violation {
    pub u: f64,
    pub end: u8,
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bistable() -> ModelSpec {
        ModelSpec::builtin(
            BuiltinModel::SaturatingBistableBoundary {
                r: Expr::Sum { terms: vec![Expr::constant(1.0), Expr::Cos { k: 1.0, amp: 0.5 }] },
                k: 2.0,
                gamma: Expr::Poly { coeffs: vec![0.5, 0.25] },
                a: 0.3,
            },
            -1.0,
            -0.5,
            0.4,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn expression_eval() {
        let e = Expr::Product {
            factors: vec![Expr::Poly { coeffs: vec![1.0, 2.0, 3.0] }, Expr::Sin { k: 1.0, amp: 2.0 }],
        };
        let x = 0.3;
        let expect = (1.0 + 0.6 + 0.27) * 2.0 * (PI * x / 2.0).sin();
        assert!((e.eval(x, 2.0) - expect).abs() < 1e-15);
    }

    #[test]
    fn expression_serde_roundtrip() {
        let e = Expr::Sum { terms: vec![Expr::Cos { k: 1.0, amp: 1.0 }, Expr::constant(-0.2)] };
        let s = serde_json::to_string(&e).unwrap();
        let back: Expr = serde_json::from_str(&s).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        let m = bistable();
        for &x in &[0.0, 0.37, 1.0] {
            for &u in &[0.0, 0.2, 0.7] {
                let h = 1e-5;
                let fu = (m.f(x, u + h) - m.f(x, u - h)) / (2.0 * h);
                let fuu = (m.f_u(x, u + h) - m.f_u(x, u - h)) / (2.0 * h);
                assert!((fu - m.f_u(x, u)).abs() < 1e-8);
                assert!((fuu - m.f_uu(x, u)).abs() < 1e-7);
            }
        }
        for &u in &[0.0, 0.3, 0.9] {
            let h = 1e-5;
            assert!(((m.g(u + h) - m.g(u - h)) / (2.0 * h) - m.g_u(u)).abs() < 1e-8);
            assert!(((m.g_u(u + h) - m.g_u(u - h)) / (2.0 * h) - m.g_uu(u)).abs() < 1e-8);
            assert!(((m.g_uu(u + h) - m.g_uu(u - h)) / (2.0 * h) - m.g_uuu(u)).abs() < 1e-8);
        }
    }

    #[test]
    fn custom_model_fallback_is_explicit_and_accurate() {
        let c = CustomModel::new(|x, u| (1.0 + x) * u.sin(), |u| u.powi(3) - u);
        assert!(c.uses_fd_fallback());
        let m = ModelSpec::custom(c, -1.0, -1.0, 0.0, 1.0).unwrap();
        assert!(m.uses_fd_fallback());
        let u = 0.4;
        assert!((m.f_u(0.5, u) - 1.5 * u.cos()).abs() < 1e-8);
        assert!((m.f_uu(0.5, u) + 1.5 * u.sin()).abs() < 1e-6);
        assert!((m.g_u(u) - (3.0 * u * u - 1.0)).abs() < 1e-8);
        assert!((m.g_uu(u) - 6.0 * u).abs() < 1e-6);
        assert!((m.g_uuu(u) - 6.0).abs() < 1e-4);
    }

    #[test]
    fn a0_check_flags_bistable_boundary() {
        let m = bistable();
        let v = m.check_a0(1.0, 1000);
        assert!(!v.is_empty());
        assert!(v.iter().all(|p| p.u > 0.0 && p.u < 0.3 + 1e-9));
        let logistic = ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.0, 1.0).unwrap();
        assert!(logistic.check_a0(1.0, 1000).is_empty());
    }

    #[test]
    fn a3_threshold() {
        let m = ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.5, 1.0).unwrap();
        assert!(!m.check_a3(3.0));
        assert!(m.check_a3(1.9));
    }

    #[test]
    fn rejects_non_finite_parameters() {
        assert!(ModelSpec::logistic(Expr::constant(f64::NAN), -1.0, -1.0, 0.0, 1.0).is_err());
        assert!(ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, f64::INFINITY, 1.0).is_err());
        assert!(ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.0, 0.0).is_err());
    }
}
