//! Method-of-lines integration of the delayed equation.
//!
//! Every term is advanced with the trapezoidal rule and the implicit stage is
//! solved by Newton with the tridiagonal current-state Jacobian. The delayed
//! field is read from a history buffer by linear interpolation; with
//! `dt <= sigma` both delayed states of a step are already known.

use std::collections::VecDeque;

use serde::Serialize;

use crate::discrete::{boundary_fluxes, jacobian_current, jacobian_delayed, residual};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::model::ModelSpec;

#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    snaps: VecDeque<(f64, Field)>,
    initial: Field,
}

impl HistoryBuffer {
    /// Constant history `u(t) = initial` for `t <= 0`.
    pub fn constant(initial: Field) -> Self {
        let mut snaps = VecDeque::new();
        snaps.push_back((0.0, initial.clone()));
        Self { snaps, initial }
    }

    pub fn push(&mut self, t: f64, u: Field) {
        debug_assert!(t > self.snaps.back().map(|s| s.0).unwrap_or(f64::NEG_INFINITY));
        self.snaps.push_back((t, u));
    }

    /// Drops snapshots that can no longer be needed by a lookup at or after `t_min`.
    pub fn prune(&mut self, t_min: f64) {
        while self.snaps.len() > 2 && self.snaps[1].0 <= t_min {
            self.snaps.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.snaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snaps.is_empty()
    }

    pub fn at(&self, t: f64) -> Result<Field> {
        if t <= 0.0 {
            return Ok(self.initial.clone());
        }
        let front = self.snaps.front().map(|s| s.0).unwrap_or(0.0);
        let back = self.snaps.back().map(|s| s.0).unwrap_or(0.0);
        if t < front || t > back * (1.0 + 1e-14) + 1e-14 {
            return Err(Error::HistoryUnderrun { t });
        }
        let k = self.snaps.partition_point(|s| s.0 < t);
        if k == 0 {
            return Ok(self.snaps[0].1.clone());
        }
        if k == self.snaps.len() {
            return Ok(self.snaps[k - 1].1.clone());
        }
        let (t0, u0) = &self.snaps[k - 1];
        let (t1, u1) = &self.snaps[k];
        let a = (t - t0) / (t1 - t0);
        Ok(u0 * (1.0 - a) + u1 * a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    ConvergedToSteady,
    SustainedOscillation,
    Diverged,
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// Time step; defaults to `min(sigma / 64, 1e-3 T)` (`1e-3 T` without delay).
    pub dt: Option<f64>,
    /// Probe positions in `[0, L]`. The first probe is used for period detection.
    pub probes: Vec<f64>,
    /// Number of recorded samples (roughly).
    pub samples: usize,
    /// Steady state used by the convergence test.
    pub reference: Option<Field>,
    pub audit_mass: bool,
    pub newton_tol: f64,
    /// Times at which the full field is stored (the first step at or after each).
    pub snapshot_times: Vec<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { dt: None, probes: vec![0.5], samples: 4000, reference: None, audit_mass: false, newton_tol: 1e-12, snapshot_times: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
    pub probe_x: Vec<f64>,
    /// `probes[k][j]` is probe k at `times[j]`.
    pub probes: Vec<Vec<f64>>,
    pub classification: Classification,
    pub period: Option<f64>,
    pub amplitude: Option<f64>,
    pub min_value: f64,
    /// `max |u(T) - reference|` when a reference was given.
    pub final_distance: Option<f64>,
    pub mass_defect: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    #[serde(skip)]
    pub final_state: Field,
    #[serde(skip)]
    pub snapshots: Vec<(f64, Field)>,
}

/// `d/dt int u` predicted from the boundary and reaction terms alone.
pub fn mass_budget(grid: &Grid1D, model: &ModelSpec, lambda: f64, u: &Field, w: &Field) -> f64 {
    let qu = boundary_fluxes(model, lambda, u);
    let mut b = qu.0 + qu.1;
    if model.d != 0.0 {
        let qw = boundary_fluxes(model, lambda, w);
        b += model.d * grid.flux_divergence_boundary(u, w, qu, qw);
    }
    b + grid.integrate(&Field::from_fn(grid.len(), |i, _| lambda * u[i] * model.f(grid.nodes[i], u[i])))
}

pub fn default_dt(sigma: f64, t_end: f64) -> f64 {
    if sigma > 0.0 {
        (sigma / 64.0).min(1e-3 * t_end)
    } else {
        1e-3 * t_end
    }
}

#[allow(clippy::too_many_arguments)]
fn implicit_stage(
    grid: &Grid1D,
    model: &ModelSpec,
    lambda: f64,
    u: &Field,
    f_old: &Field,
    w_new: Option<&Field>,
    dt: f64,
    tol: f64,
    t: f64,
) -> Result<(Field, Field)> {
    let n1 = grid.len();
    let mut v = u.clone();
    for _ in 0..30 {
        let w = w_new.unwrap_or(&v);
        let r = residual(grid, model, lambda, &v, w);
        let g = &v - u - (&r + f_old) * (0.5 * dt);
        let mut jac = jacobian_current(grid, model, lambda, &v, w);
        if w_new.is_none() {
            jac = jac.axpy(1.0, &jacobian_delayed(grid, model, lambda, &v, &v));
        }
        let mut m = jac.scaled(-0.5 * dt);
        for i in 0..n1 {
            m.diag[i] += 1.0;
        }
        let Some(dv) = m.solve(&(-&g)) else { return Err(Error::StepUnstable { t }) };
        v += &dv;
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::StepUnstable { t });
        }
        if dv.amax() <= tol * (1.0 + v.amax()) {
            let w = w_new.unwrap_or(&v);
            let r = residual(grid, model, lambda, &v, w);
            return Ok((v, r));
        }
    }
    Err(Error::StepUnstable { t })
}

/// Integrates from a constant history to `t_end`.
pub fn integrate(
    grid: &Grid1D,
    model: &ModelSpec,
    lambda: f64,
    sigma: f64,
    history_init: &Field,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if history_init.len() != grid.len() {
        return Err(Error::Validation("history length does not match grid".into()));
    }
    if !(t_end > 0.0) || !(sigma >= 0.0) || !t_end.is_finite() || !sigma.is_finite() {
        return Err(Error::Validation("need t_end > 0 and sigma >= 0".into()));
    }
    let mut dt = opts.dt.unwrap_or_else(|| default_dt(sigma, t_end));
    if !(dt > 0.0) {
        return Err(Error::Validation("dt must be positive".into()));
    }
    if sigma > 0.0 && dt > sigma {
        dt = sigma;
    }
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let stride = (steps / opts.samples.max(1)).max(1);
    let probe_idx: Vec<usize> = opts
        .probes
        .iter()
        .map(|&x| ((x / grid.length) * grid.n as f64).round().clamp(0.0, grid.n as f64) as usize)
        .collect();

    let mut hist = HistoryBuffer::constant(history_init.clone());
    let mut u = history_init.clone();
    let delayed = sigma > 0.0;
    let w0 = if delayed { hist.at(-sigma)? } else { u.clone() };
    let mut f_old = residual(grid, model, lambda, &u, &w0);
    let mut w_old = w0;

    let mut times = Vec::new();
    let mut mean = Vec::new();
    let mut maxv = Vec::new();
    let mut probes: Vec<Vec<f64>> = vec![Vec::new(); probe_idx.len()];
    let mut min_value = history_init.min();
    let mut mass_defect: f64 = 0.0;
    let record = |t: f64, u: &Field, times: &mut Vec<f64>, mean: &mut Vec<f64>, maxv: &mut Vec<f64>, probes: &mut Vec<Vec<f64>>| {
        times.push(t);
        mean.push(grid.integrate(u) / grid.length);
        maxv.push(u.max());
        for (k, &i) in probe_idx.iter().enumerate() {
            probes[k].push(u[i]);
        }
    };
    record(0.0, &u, &mut times, &mut mean, &mut maxv, &mut probes);
    let blowup = 1e6 * (1.0 + history_init.amax());
    let mut wanted: Vec<f64> = opts.snapshot_times.iter().copied().filter(|t| t.is_finite()).collect();
    wanted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut wanted = wanted.into_iter().peekable();
    let mut snapshots = Vec::new();
    while wanted.peek().is_some_and(|&t| t <= 0.0) {
        wanted.next();
        snapshots.push((0.0, u.clone()));
    }
    let mut diverged = false;

    for s in 1..=steps {
        let t_new = s as f64 * dt;
        let w_new = if delayed { Some(hist.at(t_new - sigma)?) } else { None };
        let (v, f_new) = implicit_stage(grid, model, lambda, &u, &f_old, w_new.as_ref(), dt, opts.newton_tol, t_new)?;
        if opts.audit_mass {
            let wn = w_new.clone().unwrap_or_else(|| v.clone());
            let um = (&u + &v) * 0.5;
            let wm = (&w_old + &wn) * 0.5;
            let rate = (grid.integrate(&v) - grid.integrate(&u)) / dt;
            let defect = (rate - mass_budget(grid, model, lambda, &um, &wm)).abs();
            mass_defect = mass_defect.max(defect);
            w_old = wn;
        }
        u = v;
        f_old = f_new;
        min_value = min_value.min(u.min());
        if delayed {
            hist.push(t_new, u.clone());
            hist.prune(t_new + 0.5 * dt - sigma);
        }
        while wanted.peek().is_some_and(|&t| t <= t_new + 1e-12 * t_end) {
            wanted.next();
            snapshots.push((t_new, u.clone()));
        }
        if s % stride == 0 || s == steps {
            record(t_new, &u, &mut times, &mut mean, &mut maxv, &mut probes);
        }
        if u.amax() > blowup {
            diverged = true;
            break;
        }
    }

    let final_distance = opts.reference.as_ref().map(|r| (&u - r).amax());
    let (classification, period, amplitude) = if diverged {
        (Classification::Diverged, None, None)
    } else {
        let reference_probe = opts.reference.as_ref().and_then(|r| probe_idx.first().map(|&i| r[i]));
        classify(&times, probes.first().map(|p| p.as_slice()).unwrap_or(&[]), final_distance, reference_probe)
    };
    Ok(Trajectory {
        times,
        mean,
        max: maxv,
        probe_x: probe_idx.iter().map(|&i| grid.nodes[i]).collect(),
        probes,
        classification,
        period,
        amplitude,
        min_value,
        final_distance,
        mass_defect: opts.audit_mass.then_some(mass_defect),
        dt,
        steps,
        final_state: u,
        snapshots,
    })
}

/// Local maxima of `y` as (time, value), refined by a parabola through three samples.
fn peaks(t: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for j in 1..y.len().saturating_sub(1) {
        if y[j] > y[j - 1] && y[j] >= y[j + 1] {
            let (a, b, c) = (y[j - 1], y[j], y[j + 1]);
            let den = a - 2.0 * b + c;
            let off = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            let h = t[j + 1] - t[j];
            out.push((t[j] + off * h, b - 0.25 * (a - c) * off));
        }
    }
    out
}

/// Classification from the last 40% of the probe series.
pub fn classify(
    times: &[f64],
    probe: &[f64],
    final_distance: Option<f64>,
    reference: Option<f64>,
) -> (Classification, Option<f64>, Option<f64>) {
    if probe.len() < 8 {
        return (Classification::Undetermined, None, None);
    }
    let start = (probe.len() as f64 * 0.6) as usize;
    let t = &times[start..];
    let y = &probe[start..];
    let centre = reference.unwrap_or_else(|| y.iter().sum::<f64>() / y.len() as f64);
    let dev: Vec<f64> = y.iter().map(|v| (v - centre).abs()).collect();
    let hi = peaks(t, y);
    let lo: Vec<(f64, f64)> = peaks(t, &y.iter().map(|v| -v).collect::<Vec<_>>()).into_iter().map(|(a, b)| (a, -b)).collect();

    let envelope_decreasing = {
        let ep = peaks(t, &dev);
        if ep.len() >= 2 {
            ep.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9))
        } else {
            dev.last().copied().unwrap_or(0.0) <= dev.first().copied().unwrap_or(0.0)
        }
    };
    if let Some(d) = final_distance {
        if d < 1e-5 && envelope_decreasing {
            return (Classification::ConvergedToSteady, None, None);
        }
    }

    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    if hi.len() >= 5 && lo.len() >= 4 {
        // half peak-to-trough amplitude for each peak against the nearest trough
        let amps: Vec<f64> = hi
            .iter()
            .filter_map(|&(tp, vp)| {
                lo.iter().min_by(|a, b| (a.0 - tp).abs().partial_cmp(&(b.0 - tp).abs()).unwrap()).map(|&(_, vt)| 0.5 * (vp - vt))
            })
            .collect();
        let n = amps.len();
        let tail = &amps[n.saturating_sub(5)..];
        let steady = tail.windows(2).all(|w| (w[1] - w[0]).abs() < 0.05 * w[0].abs().max(w[1].abs()));
        let visible = tail.iter().all(|a| *a > 1e-9 * scale);
        if steady && visible {
            let period = (hi[hi.len() - 1].0 - hi[0].0) / (hi.len() - 1) as f64;
            let amplitude = tail.iter().sum::<f64>() / tail.len() as f64;
            return (Classification::SustainedOscillation, Some(period), Some(amplitude));
        }
    }
    if final_distance.is_none() && envelope_decreasing {
        let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - y.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread < 1e-5 {
            return (Classification::ConvergedToSteady, None, None);
        }
    }
    (Classification::Undetermined, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Expr;

    #[test]
    fn zero_history_stays_zero() {
        let g = Grid1D::new(32, 1.0).unwrap();
        let m = ModelSpec::logistic(Expr::constant(1.0), -1.0, -1.0, 0.5, 1.0).unwrap();
        let opts = IntegrateOptions { audit_mass: true, ..Default::default() };
        let tr = integrate(&g, &m, 3.0, 0.7, &Field::zeros(33), 5.0, &opts).unwrap();
        assert_eq!(tr.final_state.amax(), 0.0);
        assert_eq!(tr.mass_defect, Some(0.0));
    }

    #[test]
    fn history_interpolates_linearly() {
        let mut h = HistoryBuffer::constant(Field::from_element(2, 1.0));
        h.push(1.0, Field::from_element(2, 3.0));
        h.push(2.0, Field::from_element(2, 4.0));
        assert_eq!(h.at(-0.3).unwrap()[0], 1.0);
        assert!((h.at(0.25).unwrap()[0] - 1.5).abs() < 1e-15);
        assert!((h.at(1.5).unwrap()[1] - 3.5).abs() < 1e-15);
        h.prune(1.2);
        assert!(matches!(h.at(0.5), Err(Error::HistoryUnderrun { .. })));
        assert!(matches!(h.at(2.5), Err(Error::HistoryUnderrun { .. })));
    }

    #[test]
    fn classify_synthetic_signals() {
        let t: Vec<f64> = (0..4000).map(|i| i as f64 * 0.05).collect();
        let osc: Vec<f64> = t.iter().map(|s| 1.0 + 0.1 * (2.0 * std::f64::consts::PI * s / 7.0).sin()).collect();
        let (c, p, a) = classify(&t, &osc, Some(0.1), Some(1.0));
        assert_eq!(c, Classification::SustainedOscillation);
        assert!((p.unwrap() - 7.0).abs() < 1e-3);
        assert!((a.unwrap() - 0.1).abs() < 1e-4);
        let decay: Vec<f64> = t.iter().map(|s| 1.0 + 1e-3 * (-0.1 * s).exp() * s.sin()).collect();
        let (c, _, _) = classify(&t, &decay, Some(1e-7), Some(1.0));
        assert_eq!(c, Classification::ConvergedToSteady);
    }
}
