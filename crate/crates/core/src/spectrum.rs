//! Spectrum of the linearisation `(A + e^{-mu sigma} B) psi = mu psi`.
//!
//! Both `A` and `B` are tridiagonal, so the characteristic function
//! `chi(mu) = det(mu I - A - e^{-mu sigma} B)` and its logarithmic derivative
//! cost O(N). Roots are refined by Newton on `log chi`, unstable roots are
//! counted with the argument principle, and imaginary-axis crossings are
//! located by sweeping `theta` in `A + e^{-i theta} B`: every crossing is a
//! purely imaginary eigenvalue `i omega` of that matrix, and it recurs at
//! `sigma_n = (theta + 2 n pi) / omega`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::discrete::{jacobian_current, jacobian_delayed};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::model::ModelSpec;
use crate::tridiag::{CTridiag, Tridiag};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone)]
pub struct LinearizedPair {
    pub a: Tridiag,
    pub b: Tridiag,
    /// Quadrature weights, used for the bilinear pairings of the reduced theory.
    pub weights: Vec<f64>,
}

pub fn assemble_linearization(grid: &Grid1D, model: &ModelSpec, lambda: f64, u_star: &Field) -> LinearizedPair {
    LinearizedPair {
        a: jacobian_current(grid, model, lambda, u_star, u_star),
        b: jacobian_delayed(grid, model, lambda, u_star, u_star),
        weights: grid.weights.clone(),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectrumOptions {
    /// Number of rightmost eigenvalues tracked.
    pub tracked: usize,
    /// Bisection tolerance for crossings, in sigma.
    pub crossing_tol: f64,
    /// Steps of the theta sweep over [0, 2 pi).
    pub theta_steps: usize,
    /// Dense guard solve every this many theta steps.
    pub guard_every: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { tracked: 20, crossing_tol: 1e-8, theta_steps: 720, guard_every: 60 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub sigma: f64,
    pub omega: f64,
    pub theta: f64,
    pub rung: usize,
    /// Exact derivative from left and right eigenvectors.
    pub dmu_dsigma: (f64, f64),
    /// Same quantity from the bilinear (self-adjoint) pairing of the reduced theory.
    pub dmu_dsigma_bilinear: (f64, f64),
    /// `Xi` from the bilinear pairing, `int psi (psi + sigma e^{-i theta} B psi)`.
    pub xi: (f64, f64),
    /// Condition number of the bordered Newton matrix at the crossing.
    pub bordered_condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumResult {
    pub sigma: f64,
    /// Rightmost eigenvalues, sorted by decreasing real part, as (re, im).
    pub eigenvalues: Vec<(f64, f64)>,
    pub unstable_count: usize,
    pub crossing: Option<Crossing>,
}

impl SpectrumResult {
    pub fn rightmost_re(&self) -> f64 {
        self.eigenvalues.first().map(|e| e.0).unwrap_or(f64::NEG_INFINITY)
    }
}

fn char_matrix(pair: &LinearizedPair, mu: Complex64, sigma: f64) -> CTridiag {
    let e = (-mu * sigma).exp();
    CTridiag::combine(-ONE, &pair.a, -e, &pair.b, mu)
}

/// `log chi(mu)` from a pivoted factorisation.
pub fn log_char_pivoted(pair: &LinearizedPair, mu: Complex64, sigma: f64) -> Complex64 {
    char_matrix(pair, mu, sigma).log_det()
}

/// `log chi(mu)` and `d/dmu log chi(mu)`.
pub fn log_char(pair: &LinearizedPair, mu: Complex64, sigma: f64) -> (Complex64, Complex64) {
    let t = char_matrix(pair, mu, sigma);
    let e = (-mu * sigma).exp();
    let eye = Tridiag { sub: vec![0.0; pair.a.dim() - 1], diag: vec![1.0; pair.a.dim()], sup: vec![0.0; pair.a.dim() - 1] };
    let dt = CTridiag::combine(ONE, &eye, e * sigma, &pair.b, ZERO);
    t.log_det_with_derivative(&dt)
}

/// Newton on `log chi`, with the step capped at `radius`.
pub fn newton_root(pair: &LinearizedPair, mu0: Complex64, sigma: f64, radius: f64) -> Option<Complex64> {
    let mut mu = mu0;
    let mut last = f64::INFINITY;
    let mut polish = 0;
    for _ in 0..60 {
        let (_, dl) = log_char(pair, mu, sigma);
        if !dl.re.is_finite() || !dl.im.is_finite() {
            // landed exactly on a root
            return Some(mu);
        }
        if dl.norm() == 0.0 {
            return (last < 1e-8 * (1.0 + mu.norm())).then_some(mu);
        }
        let mut step = -ONE / dl;
        if step.norm() > radius {
            step *= radius / step.norm();
        }
        mu += step;
        last = step.norm();
        if (mu - mu0).norm() > 4.0 * radius {
            return None;
        }
        if step.norm() <= 1e-9 * (1.0 + mu.norm()) {
            polish += 1;
            if polish == 3 {
                return Some(mu);
            }
        }
    }
    None
}

/// Newton for an eigenvalue of `A + c B` (no delay).
fn newton_matrix_root(pair: &LinearizedPair, c: Complex64, nu0: Complex64, radius: f64) -> Option<Complex64> {
    let n = pair.a.dim();
    let eye = Tridiag { sub: vec![0.0; n - 1], diag: vec![1.0; n], sup: vec![0.0; n - 1] };
    let dt = CTridiag::combine(ONE, &eye, ZERO, &pair.b, ZERO);
    let mut nu = nu0;
    let mut last = f64::INFINITY;
    let mut polish = 0;
    for _ in 0..60 {
        let t = CTridiag::combine(-ONE, &pair.a, -c, &pair.b, nu);
        let (_, dl) = t.log_det_with_derivative(&dt);
        if !dl.re.is_finite() || !dl.im.is_finite() {
            // landed exactly on a root
            return Some(nu);
        }
        if dl.norm() == 0.0 {
            return (last < 1e-8 * (1.0 + nu.norm())).then_some(nu);
        }
        let mut step = -ONE / dl;
        if step.norm() > radius {
            step *= radius / step.norm();
        }
        nu += step;
        last = step.norm();
        if (nu - nu0).norm() > 4.0 * radius {
            return None;
        }
        if step.norm() <= 1e-9 * (1.0 + nu.norm()) {
            polish += 1;
            if polish == 3 {
                return Some(nu);
            }
        }
    }
    None
}

fn sort_rightmost(v: &mut [Complex64]) {
    v.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
}

fn dense_eigenvalues(m: DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = m.complex_eigenvalues().iter().copied().collect();
    sort_rightmost(&mut ev);
    ev
}

fn dense_complex_eigenvalues(pair: &LinearizedPair, c: Complex64) -> Vec<Complex64> {
    let m = pair.a.to_dense().map(|v| Complex64::new(v, 0.0)) + pair.b.to_dense().map(|v| c * v);
    let schur = m.schur();
    let (_, t) = schur.unpack();
    let mut ev: Vec<Complex64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    sort_rightmost(&mut ev);
    ev
}

/// Eigenvalues of `A + B`, rightmost first.
pub fn delay_free_spectrum(pair: &LinearizedPair) -> SpectrumResult {
    let ev = dense_eigenvalues(pair.a.axpy(1.0, &pair.b).to_dense());
    let unstable_count = ev.iter().filter(|z| z.re > 0.0).count();
    SpectrumResult { sigma: 0.0, eigenvalues: ev.iter().map(|z| (z.re, z.im)).collect(), unstable_count, crossing: None }
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Number of roots of `chi` (with multiplicity) inside the rectangle
/// `(re0, re1) x (im0, im1)`, by the argument principle.
///
/// Each edge is walked with steps limited by the local logarithmic
/// derivative so the phase advances by at most a fraction of a radian per
/// step; the phase itself comes from a pivoted factorisation.
pub fn count_roots_in_rect(pair: &LinearizedPair, sigma: f64, re: (f64, f64), im: (f64, f64)) -> Option<i64> {
    let corners = [
        Complex64::new(re.0, im.0),
        Complex64::new(re.1, im.0),
        Complex64::new(re.1, im.1),
        Complex64::new(re.0, im.1),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        total += edge_phase(pair, sigma, corners[k], corners[(k + 1) % 4])?;
    }
    let w = total / (2.0 * PI);
    let r = w.round();
    if (w - r).abs() > 0.05 {
        return None;
    }
    Some(r as i64)
}

fn edge_phase(pair: &LinearizedPair, sigma: f64, a: Complex64, b: Complex64) -> Option<f64> {
    const MAX_DPHASE: f64 = 0.25;
    let len = (b - a).norm();
    let dir = (b - a) / len;
    let max_step = len / 16.0;
    let min_step = len * 1e-12;
    let mut s = 0.0;
    let mut la = log_char_pivoted(pair, a, sigma);
    let mut total = 0.0;
    while s < len {
        let z = a + dir * s;
        let (_, g) = log_char(pair, z, sigma);
        let speed = if g.re.is_finite() && g.im.is_finite() { g.norm() } else { f64::INFINITY };
        let mut step = (MAX_DPHASE / speed).clamp(min_step, max_step).min(len - s);
        loop {
            let zb = if s + step >= len { b } else { a + dir * (s + step) };
            let lb = log_char_pivoted(pair, zb, sigma);
            let d = wrap(lb.im - la.im);
            if !d.is_finite() {
                return None;
            }
            if d.abs() <= 2.0 * MAX_DPHASE || step <= min_step {
                total += d;
                la = lb;
                s += step;
                break;
            }
            step *= 0.5;
        }
    }
    Some(total)
}

/// An imaginary-axis eigenvalue `i omega` of `A + e^{-i theta} B`, omega > 0.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AxisPoint {
    pub theta: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaSweep {
    pub axis_points: Vec<AxisPoint>,
    /// Largest modulus of any tracked eigenvalue with real part above -1,
    /// over the sweep; sets the size of the counting region.
    pub radius: f64,
}

/// Finds every `theta` for which a tracked eigenvalue of `A + e^{-i theta} B` is purely imaginary.
pub fn theta_sweep(pair: &LinearizedPair, opts: &SpectrumOptions) -> ThetaSweep {
    let base = dense_eigenvalues(pair.a.axpy(1.0, &pair.b).to_dense());
    let k = opts.tracked.min(base.len());
    let mut tracked: Vec<Complex64> = base[..k].to_vec();
    let mut radius: f64 = 0.0;
    let note = |radius: &mut f64, v: &[Complex64]| {
        for z in v {
            if z.re > -1.0 {
                *radius = radius.max(z.norm());
            }
        }
    };
    note(&mut radius, &tracked);
    let dth = 2.0 * PI / opts.theta_steps as f64;
    let mut points: Vec<AxisPoint> = Vec::new();
    for s in 0..opts.theta_steps {
        let th0 = s as f64 * dth;
        let th1 = th0 + dth;
        if s > 0 && s % opts.guard_every == 0 {
            let dense = dense_complex_eigenvalues(pair, Complex64::from_polar(1.0, -th0));
            let floor = tracked.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            for z in dense.iter().take(k) {
                let known = tracked.iter().any(|t| (t - z).norm() < 1e-6 * (1.0 + z.norm()));
                if !known && z.re > floor {
                    tracked.push(*z);
                }
            }
        }
        let c1 = Complex64::from_polar(1.0, -th1);
        let mut next = Vec::with_capacity(tracked.len());
        for &nu in &tracked {
            let r = 0.05 * (1.0 + nu.norm());
            let Some(nu1) = newton_matrix_root(pair, c1, nu, r) else { continue };
            if nu.re.signum() != nu1.re.signum() {
                if let Some(p) = refine_axis_point(pair, th0, th1, nu, nu1) {
                    if p.omega > 0.0 && !points.iter().any(|q| (q.theta - p.theta).abs() < 1e-9 && (q.omega - p.omega).abs() < 1e-9) {
                        points.push(p);
                    }
                }
            }
            next.push(nu1);
        }
        next.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        next.dedup_by(|a, b| (*a - *b).norm() < 1e-9 * (1.0 + a.norm()));
        note(&mut radius, &next);

        tracked = next;
    }
    points.sort_by(|a, b| (a.theta / a.omega).partial_cmp(&(b.theta / b.omega)).unwrap());
    ThetaSweep { axis_points: points, radius }
}

fn refine_axis_point(pair: &LinearizedPair, mut t0: f64, mut t1: f64, mut n0: Complex64, mut n1: Complex64) -> Option<AxisPoint> {
    for _ in 0..80 {
        // secant-bisection hybrid on Re nu(theta)
        let mut tm = t0 - n0.re * (t1 - t0) / (n1.re - n0.re);
        if !(tm > t0.min(t1) && tm < t0.max(t1)) {
            tm = 0.5 * (t0 + t1);
        }
        let seed = n0 + (n1 - n0) * ((tm - t0) / (t1 - t0));
        let nm = newton_matrix_root(pair, Complex64::from_polar(1.0, -tm), seed, 0.05 * (1.0 + seed.norm()))?;
        if nm.re.abs() < 1e-14 * (1.0 + nm.norm()) || (t1 - t0).abs() < 1e-15 {
            return Some(AxisPoint { theta: tm.rem_euclid(2.0 * PI), omega: nm.im });
        }
        if nm.re.signum() == n0.re.signum() {
            t0 = tm;
            n0 = nm;
        } else {
            t1 = tm;
            n1 = nm;
        }
    }
    let n = if n0.re.abs() < n1.re.abs() { (t0, n0) } else { (t1, n1) };
    Some(AxisPoint { theta: n.0.rem_euclid(2.0 * PI), omega: n.1.im })
}

/// Right and left null vectors of `chi(mu)` by inverse iteration.
fn null_vectors(pair: &LinearizedPair, mu: Complex64, sigma: f64) -> Option<(DVector<Complex64>, DVector<Complex64>)> {
    let mut t = char_matrix(pair, mu, sigma);
    let n = t.dim();
    let shift = 1e-12 * (1.0 + t.diag.iter().map(|v| v.norm()).fold(0.0, f64::max));
    for v in t.diag.iter_mut() {
        *v += shift;
    }
    let th = t.adjoint();
    let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * (i as f64).sin(), 0.0));
    let mut y = x.clone();
    for _ in 0..3 {
        x = t.solve(&x)?;
        let s = x.norm();
        x /= Complex64::new(s, 0.0);
        y = th.solve(&y)?;
        let s = y.norm();
        y /= Complex64::new(s, 0.0);
    }
    Some((x, y))
}

fn bordered_condition(pair: &LinearizedPair, mu: Complex64, sigma: f64, psi: &DVector<Complex64>) -> f64 {
    let n = pair.a.dim();
    let e = (-mu * sigma).exp();
    let a = pair.a.to_dense().map(|v| Complex64::new(v, 0.0));
    let b = pair.b.to_dense().map(|v| Complex64::new(v, 0.0));
    let t = DMatrix::<Complex64>::identity(n, n) * mu - &a - &b * e;
    let dt = (DMatrix::<Complex64>::identity(n, n) + &b * (e * sigma)) * psi;
    let mut m = DMatrix::<Complex64>::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&t);
    for i in 0..n {
        m[(i, n)] = dt[i];
        m[(n, i)] = psi[i].conj();
    }
    let sv = m.singular_values();
    let mx = sv.iter().cloned().fold(0.0_f64, f64::max);
    let mn = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    mx / mn
}

/// Derivative data at a root `mu` of `chi(., sigma)`.
pub fn root_derivatives(pair: &LinearizedPair, mu: Complex64, sigma: f64) -> Option<(Complex64, Complex64, Complex64)> {
    let (psi, y) = null_vectors(pair, mu, sigma)?;
    let e = (-mu * sigma).exp();
    let n = pair.a.dim();
    let bmat = CTridiag::combine(ONE, &pair.b, ZERO, &pair.b, ZERO);
    let bpsi = bmat.mul_vec(&psi);
    let ybpsi: Complex64 = (0..n).map(|i| y[i].conj() * bpsi[i]).sum();
    let ypsi: Complex64 = (0..n).map(|i| y[i].conj() * psi[i]).sum();
    let exact = -mu * e * ybpsi / (ypsi + e * sigma * ybpsi);
    let w = &pair.weights;
    let pp: Complex64 = (0..n).map(|i| psi[i] * psi[i] * w[i]).sum();
    let pbp: Complex64 = (0..n).map(|i| psi[i] * bpsi[i] * w[i]).sum();
    let xi = (pp + e * sigma * pbp) / pp;
    let bilinear = -mu * e * (pbp / pp) / xi;
    Some((exact, bilinear, xi))
}

fn crossing_info(pair: &LinearizedPair, p: &AxisPoint, rung: usize) -> Crossing {
    let sigma = (p.theta + 2.0 * PI * rung as f64) / p.omega;
    let mu = Complex64::new(0.0, p.omega);
    let (exact, bilinear, xi) = root_derivatives(pair, mu, sigma).unwrap_or((ZERO, ZERO, ZERO));
    let cond = null_vectors(pair, mu, sigma).map(|(psi, _)| bordered_condition(pair, mu, sigma, &psi)).unwrap_or(f64::INFINITY);
    Crossing {
        sigma,
        omega: p.omega,
        theta: p.theta,
        rung,
        dmu_dsigma: (exact.re, exact.im),
        dmu_dsigma_bilinear: (bilinear.re, bilinear.im),
        xi: (xi.re, xi.im),
        bordered_condition: cond,
    }
}

/// All crossings with sigma up to `sigma_max`, sorted by sigma.
pub fn crossings(pair: &LinearizedPair, sweep: &ThetaSweep, sigma_max: f64) -> Vec<Crossing> {
    let mut out = Vec::new();
    for p in &sweep.axis_points {
        let mut n = 0;
        while (p.theta + 2.0 * PI * n as f64) / p.omega <= sigma_max {
            out.push(crossing_info(pair, p, n));
            n += 1;
        }
    }
    out.sort_by(|a, b| a.sigma.partial_cmp(&b.sigma).unwrap());
    out
}

/// The crossing with the smallest delay, if the sweep found any axis point.
pub fn first_crossing(pair: &LinearizedPair, sweep: &ThetaSweep) -> Option<Crossing> {
    sweep
        .axis_points
        .iter()
        .min_by(|a, b| (a.theta / a.omega).partial_cmp(&(b.theta / b.omega)).unwrap())
        .map(|p| crossing_info(pair, p, 0))
}

/// Counting region `[0, R] x [-R, R]` derived from the sweep and the delay-free spectrum.
fn count_radius(sweep: &ThetaSweep, base: &[Complex64]) -> f64 {
    let mut r = sweep.radius;
    for z in base {
        if z.re > -1.0 {
            r = r.max(z.norm());
        }
    }
    3.0 * r.max(1e-6)
}

/// Unstable count at a single sigma by the argument principle.
pub fn unstable_count(pair: &LinearizedPair, sigma: f64, radius: f64) -> Result<usize> {
    match count_roots_in_rect(pair, sigma, (0.0, radius), (-radius, radius)) {
        Some(c) if c >= 0 => Ok(c as usize),
        _ => Err(Error::NewtonLostEigenvalue { sigma }),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaSweep {
    pub results: Vec<SpectrumResult>,
    pub crossings: Vec<Crossing>,
    /// Crossing locations found by bisection on the unstable count.
    pub bisected: Vec<f64>,
    pub count_radius: f64,
    pub lost_branches: usize,
}

/// Continues the spectrum along an increasing sigma grid.
pub fn continue_in_sigma(pair: &LinearizedPair, sigma_grid: &[f64], opts: &SpectrumOptions) -> Result<SigmaSweep> {
    if sigma_grid.windows(2).any(|w| !(w[1] > w[0])) || sigma_grid.first().is_some_and(|s| *s < 0.0) {
        return Err(Error::Validation("sigma grid must be increasing and non-negative".into()));
    }
    let base = dense_eigenvalues(pair.a.axpy(1.0, &pair.b).to_dense());
    let sweep = theta_sweep(pair, opts);
    let radius = count_radius(&sweep, &base);
    let smax = sigma_grid.last().copied().unwrap_or(0.0);
    let cross = crossings(pair, &sweep, smax);

    let k = opts.tracked.min(base.len());
    let mut tracked: Vec<Complex64> = base[..k].iter().copied().filter(|z| z.im >= 0.0 && z.re > -10.0 * radius).collect();
    let mut prev_sigma = 0.0;
    let mut lost = 0;
    let mut results = Vec::with_capacity(sigma_grid.len());
    let mut bisected = Vec::new();
    let mut prev_count: Option<usize> = None;

    for &sigma in sigma_grid {
        // follow tracked roots with step halving
        let mut next = Vec::with_capacity(tracked.len());
        for &mu in &tracked {
            match follow(pair, mu, prev_sigma, sigma) {
                Some(m) => next.push(m),
                // far-left roots run off to -infinity once the delay switches on
                None if mu.re > -radius => lost += 1,
                None => {}
            }
        }
        for c in &cross {
            let mu_c = Complex64::new(0.0, c.omega);
            let d = Complex64::new(c.dmu_dsigma.0, c.dmu_dsigma.1);
            if (sigma - c.sigma).abs() * d.norm() < 0.2 * c.omega {
                let seed = mu_c + d * (sigma - c.sigma);
                if let Some(m) = newton_root(pair, seed, sigma, 0.05 * c.omega) {
                    next.push(m);
                }
            }
        }
        let mut uniq: Vec<Complex64> = Vec::new();
        for z in next {
            let z = if z.im < 0.0 { z.conj() } else { z };
            if !uniq.iter().any(|u| (u - z).norm() < 1e-8 * (1.0 + z.norm())) {
                uniq.push(z);
            }
        }
        sort_rightmost(&mut uniq);
        tracked = uniq;
        prev_sigma = sigma;

        let count = if pair.b.diag.iter().all(|v| *v == 0.0) {
            base.iter().filter(|z| z.re > 0.0).count()
        } else {
            unstable_count(pair, sigma, radius)?
        };
        let mut crossing = None;
        if let Some(pc) = prev_count {
            if pc != count {
                let lo = results.last().map(|r: &SpectrumResult| r.sigma).unwrap_or(0.0);
                let sc = bisect_count(pair, lo, sigma, pc, radius, opts.crossing_tol)?;
                bisected.push(sc);
                crossing = cross.iter().find(|c| (c.sigma - sc).abs() < 1e-6 * (1.0 + sc)).cloned();
            }
        }
        prev_count = Some(count);
        let mut all: Vec<Complex64> = Vec::new();
        for z in &tracked {
            all.push(*z);
            if z.im.abs() > 1e-12 * (1.0 + z.norm()) {
                all.push(z.conj());
            }
        }
        sort_rightmost(&mut all);
        results.push(SpectrumResult {
            sigma,
            eigenvalues: all.iter().map(|z| (z.re, z.im)).collect(),
            unstable_count: count,
            crossing,
        });
    }
    Ok(SigmaSweep { results, crossings: cross, bisected, count_radius: radius, lost_branches: lost })
}

fn follow(pair: &LinearizedPair, mu: Complex64, s0: f64, s1: f64) -> Option<Complex64> {
    let mut cur = mu;
    let mut s = s0;
    let mut ds = s1 - s0;
    while s < s1 {
        let target = (s + ds).min(s1);
        let r = 0.1 * (1.0 + cur.norm());
        let accept = |m: Option<Complex64>| m.filter(|m| (m - cur).norm() < r);
        let mut next = accept(newton_root(pair, cur, target, r));
        if next.is_none() && cur.im.abs() < 1e-6 * (1.0 + cur.norm()) {
            // a real pair may have merged into a complex one
            let kick = Complex64::new(0.0, 1e-3 * (1.0 + cur.norm()));
            next = accept(newton_root(pair, cur + kick, target, r));
        }
        match next {
            Some(m) => {
                cur = if m.im < 0.0 { m.conj() } else { m };
                s = target;
            }
            None => {
                ds *= 0.5;
                if ds < 1e-4 * (s1 - s0) {
                    return None;
                }
            }
        }
    }
    Some(cur)
}

fn bisect_count(pair: &LinearizedPair, mut lo: f64, mut hi: f64, count_lo: usize, radius: f64, tol: f64) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let c = unstable_count(pair, mid, radius)?;
        if c == count_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Step profile of unstable counts. Every change must be by exactly two.
pub fn unstable_count_profile(sweep: &SigmaSweep) -> Result<Vec<(f64, usize)>> {
    let prof: Vec<(f64, usize)> = sweep.results.iter().map(|r| (r.sigma, r.unstable_count)).collect();
    for w in prof.windows(2) {
        let jump = w[1].1 as i64 - w[0].1 as i64;
        if jump != 0 && jump.abs() != 2 {
            return Err(Error::CountJumpNotTwo { sigma: w[1].0, jump });
        }
    }
    Ok(prof)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar delay equation mu = p + q e^{-mu sigma} embedded as a 1x1 "pair".
    fn scalar(p: f64, q: f64) -> LinearizedPair {
        let t = |v: f64| Tridiag { sub: vec![0.0], diag: vec![v, -50.0], sup: vec![0.0] };
        LinearizedPair { a: t(p), b: Tridiag { sub: vec![0.0], diag: vec![q, 0.0], sup: vec![0.0] }, weights: vec![1.0, 1.0] }
    }

    #[test]
    fn scalar_crossing_matches_closed_form() {
        // mu = -1 - 3 e^{-mu sigma}: omega = sqrt(8), cos(theta) = -1/3 ... theta in (pi/2, pi)
        let pair = scalar(-1.0, -3.0);
        let sw = theta_sweep(&pair, &SpectrumOptions { tracked: 2, ..Default::default() });
        assert_eq!(sw.axis_points.len(), 1);
        let p = sw.axis_points[0];
        let omega = 8f64.sqrt();
        assert!((p.omega - omega).abs() < 1e-10);
        // i omega = -1 - 3 e^{-i theta}  =>  e^{-i theta} = -(1 + i omega) / 3
        let th = (-(Complex64::new(1.0, omega)) / 3.0).arg();
        let th = (-th).rem_euclid(2.0 * PI);
        assert!((p.theta - th).abs() < 1e-10);
    }

    #[test]
    fn scalar_count_profile() {
        let pair = scalar(-1.0, -3.0);
        let opts = SpectrumOptions { tracked: 2, ..Default::default() };
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let sw = continue_in_sigma(&pair, &grid, &opts).unwrap();
        let prof = unstable_count_profile(&sw).unwrap();
        for (s, c) in prof {
            let below = sw.crossings.iter().filter(|x| x.sigma < s).count();
            assert_eq!(c, 2 * below, "sigma {s}");
        }
        let s0 = sw.crossings[0].sigma;
        assert!((sw.bisected[0] - s0).abs() < 1e-7);
        assert!(sw.crossings[0].dmu_dsigma.0 > 0.0);
    }
}
