//! Command implementations. Each returns a [`Report`]; nothing here touches the filesystem.

use std::f64::consts::PI;
use std::sync::OnceLock;

use memdiff_core::dynamics::{integrate, Classification, IntegrateOptions, Trajectory};
use memdiff_core::eigen::{check_eigen_feasibility, principal_eigenpair, rayleigh_quotient, EigenPair};
use memdiff_core::gamma0::{bifurcation_kind, compute_coefficients, BifCoefficients};
use memdiff_core::gamma1::{analyze, classify_gamma1_stability, find_u1, psi_star_residual};
use memdiff_core::hopf::{classify_gamma0_stability, crossing_data, hopf_condition};
use memdiff_core::spectrum::{
    assemble_linearization, continue_in_sigma, crossings, first_crossing, theta_sweep, unstable_count_profile, Crossing,
    LinearizedPair, SigmaSweep,
};
use memdiff_core::steady::{
    amplitude, continue_branch_gamma0, continue_branch_gamma1, green_identity, solve_near_bifurcation, SteadyState,
};
use memdiff_core::{Error, Grid1D, ModelSpec};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Report, Table};

type Res<T> = Result<T, CliError>;

fn missing(path: &str, what: &str) -> CliError {
    CliError::Config { path: path.into(), message: format!("{what} is required for this command") }
}

/// Grid, model and (on first use) the principal eigenpair shared by every command.
pub struct Setup {
    pub cfg: RunConfig,
    pub grid: Grid1D,
    pub model: ModelSpec,
    eig: OnceLock<EigenPair>,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Res<Self> {
        let grid = cfg.grid()?;
        let model = cfg.model_spec()?;
        Ok(Self { cfg: cfg.clone(), grid, model, eig: OnceLock::new() })
    }

    pub fn eig(&self) -> Res<&EigenPair> {
        if let Some(e) = self.eig.get() {
            return Ok(e);
        }
        let e = principal_eigenpair(&self.grid, &self.model)?;
        Ok(self.eig.get_or_init(|| e))
    }

    pub fn lambda(&self) -> Res<f64> {
        let t = &self.cfg.task;
        match (t.lambda, t.lambda_rel) {
            (Some(l), _) => Ok(l),
            (None, Some(r)) => Ok(self.eig()?.lambda1 * (1.0 + r)),
            (None, None) => Err(missing("task.lambda", "`lambda` or `lambda_rel`")),
        }
    }

    pub fn coefficients(&self) -> Res<BifCoefficients> {
        Ok(compute_coefficients(&self.grid, &self.model, self.eig()?)?)
    }

    pub fn steady(&self, coeffs: &BifCoefficients, lambda: f64) -> Res<SteadyState> {
        Ok(solve_near_bifurcation(&self.grid, &self.model, self.eig()?, coeffs, lambda, &self.cfg.newton())?)
    }

    fn field_table(&self, name: &str, header: &str, u: &memdiff_core::Field) -> Table {
        let mut t = Table::new(name, &["x", header]);
        for (i, x) in self.grid.nodes.iter().enumerate() {
            t.push(vec![*x, u[i]]);
        }
        t
    }
}

/// Steady state and linearisation at the configured lambda.
pub struct Linearized {
    pub lambda: f64,
    pub coeffs: BifCoefficients,
    pub steady: SteadyState,
    pub theta_amp: f64,
    pub pair: LinearizedPair,
}

pub fn linearize(s: &Setup) -> Res<Linearized> {
    let lambda = s.lambda()?;
    let coeffs = s.coefficients()?;
    let steady = s.steady(&coeffs, lambda)?;
    let theta_amp = amplitude(&s.grid, s.eig()?, &steady.u_star);
    let pair = assemble_linearization(&s.grid, &s.model, lambda, &steady.u_star);
    Ok(Linearized { lambda, coeffs, steady, theta_amp, pair })
}

fn crossing_json(c: &Crossing) -> Value {
    json!({
        "sigma": c.sigma,
        "omega": c.omega,
        "theta": c.theta,
        "rung": c.rung,
        "dmu_dsigma": [c.dmu_dsigma.0, c.dmu_dsigma.1],
        "dmu_dsigma_bilinear": [c.dmu_dsigma_bilinear.0, c.dmu_dsigma_bilinear.1],
        "xi": [c.xi.0, c.xi.1],
        "bordered_condition": c.bordered_condition,
    })
}

pub fn eigen(s: &Setup) -> Res<Report> {
    let feas = check_eigen_feasibility(&s.grid, &s.model);
    let q = rayleigh_quotient(&s.grid, &s.model, &s.eig()?.phi1)?;
    let result = json!({
        "lambda1": s.eig()?.lambda1,
        "residual": s.eig()?.residual_norm,
        "rayleigh_quotient": q,
        "phi1_min": s.eig()?.phi1.min(),
        "phi1_norm": s.grid.norm(&s.eig()?.phi1),
        "feasibility": feas,
        "fd_derivatives": s.model.uses_fd_fallback(),
    });
    Ok(Report::new(result).table(s.field_table("phi1", "phi1", &s.eig()?.phi1)))
}

pub fn steady(s: &Setup) -> Res<Report> {
    let lambda = s.lambda()?;
    let coeffs = s.coefficients()?;
    let st = s.steady(&coeffs, lambda)?;
    let (lhs, rhs) = green_identity(&s.grid, &s.model, lambda, &st.u_star);
    let result = json!({
        "lambda": lambda,
        "lambda1": s.eig()?.lambda1,
        "residual": st.residual_norm,
        "newton_iterations": st.newton_iterations,
        "amplitude": amplitude(&s.grid, s.eig()?, &st.u_star),
        "predicted_amplitude": coeffs.branch_predictor(lambda),
        "min": st.u_star.min(),
        "max": st.u_star.max(),
        "positive": st.u_star.iter().all(|v| *v > 0.0),
        "green_identity": [lhs, rhs],
    });
    Ok(Report::new(result).table(s.field_table("steady", "u", &st.u_star)))
}

pub fn branch(s: &Setup) -> Res<Report> {
    let t = &s.cfg.task;
    let origin = t.origin.as_deref().unwrap_or("gamma0");
    if origin == "gamma_u1" {
        let [a, b] = t.bracket.ok_or_else(|| missing("task.bracket", "`bracket`"))?;
        if t.s_values.is_empty() {
            return Err(missing("task.s_values", "`s_values`"));
        }
        let roots = find_u1(&s.grid, &s.model, (a, b))?;
        let g1 = analyze(&s.grid, &s.model, roots[0])?;
        let br = continue_branch_gamma1(&s.grid, &s.model, &g1, &t.s_values, &s.cfg.newton())?;
        let mut table = Table::new("branch", &["s", "mean", "min", "max", "residual"]);
        for (p, sv) in br.points.iter().zip(&br.amplitudes) {
            let mean = s.grid.integrate(&p.u_star) / s.grid.length;
            table.push(vec![*sv, mean, p.u_star.min(), p.u_star.max(), p.residual_norm]);
        }
        let result = json!({ "origin": br.origin, "u1": g1.u1, "eta1": g1.eta1, "points": br.points.len() });
        return Ok(Report::new(result).table(table));
    }
    let coeffs = s.coefficients()?;
    let rel = if t.lambdas_rel.is_empty() {
        (1..=20).map(|k| 0.01 * k as f64 * -coeffs.kappa.signum() * coeffs.rho.signum()).collect()
    } else {
        t.lambdas_rel.clone()
    };
    let l1 = s.eig()?.lambda1;
    let lambdas: Vec<f64> = rel.iter().map(|r| l1 * (1.0 + r)).collect();
    let br = continue_branch_gamma0(&s.grid, &s.model, s.eig()?, &coeffs, &lambdas, &s.cfg.newton())?;
    let mut table = Table::new("branch", &["lambda", "amplitude", "predicted_amplitude", "min", "max", "residual"]);
    for (p, a) in br.points.iter().zip(&br.amplitudes) {
        table.push(vec![p.lambda, *a, coeffs.branch_predictor(p.lambda), p.u_star.min(), p.u_star.max(), p.residual_norm]);
    }
    let result = json!({
        "origin": br.origin,
        "lambda1": s.eig()?.lambda1,
        "requested": lambdas.len(),
        "points": br.points.len(),
    });
    Ok(Report::new(result).table(table))
}

pub fn coeffs(s: &Setup) -> Res<Report> {
    let c = s.coefficients()?;
    let kind = bifurcation_kind(&c).map(|k| json!(k)).unwrap_or_else(|e| json!(e.code()));
    let result = json!({
        "coefficients": c,
        "zero_eigenvalue": c.classify_zero_eigenvalue(),
        "bifurcation": kind,
        "hopf_condition": hopf_condition(c.kappa0, c.kappa),
        "hopf_discriminant": c.kappa * (4.0 * c.kappa0 - c.kappa),
        "identity_defect": c.kappa - (2.0 * c.kappa0 + 2.0 * c.kappa1 + c.kappa2),
        "fd_derivatives": s.model.uses_fd_fallback(),
    });
    let mut t = Table::new("coeffs", &["lambda1", "rho", "kappa0", "kappa1", "kappa2", "kappa", "nu"]);
    t.push(vec![c.lambda1, c.rho, c.kappa0, c.kappa1, c.kappa2, c.kappa, c.nu]);
    Ok(Report::new(result).table(t).table(s.field_table("correction", "sigma", &c.sigma_field)))
}

pub fn gamma1(s: &Setup) -> Res<Report> {
    let t = &s.cfg.task;
    let [a, b] = t.bracket.ok_or_else(|| missing("task.bracket", "`bracket`"))?;
    let roots = find_u1(&s.grid, &s.model, (a, b))?;
    let mut out = Vec::new();
    let mut headers = vec!["x".to_string()];
    let mut cols = Vec::new();
    for (k, &u1) in roots.iter().enumerate() {
        let d = analyze(&s.grid, &s.model, u1)?;
        let stability: Vec<Value> = t
            .s_values
            .iter()
            .map(|&sv| match classify_gamma1_stability(&d, sv) {
                Ok(c) => json!({ "s": sv, "stability": c }),
                Err(e) => json!({ "s": sv, "error": e.code() }),
            })
            .collect();
        out.push(json!({
            "data": d,
            "psi_star_residual": psi_star_residual(&s.grid, &s.model, u1, &d.psi_star),
            "psi_star_mean": s.grid.integrate(&d.psi_star) / s.grid.length,
            "stability": stability,
        }));
        headers.push(format!("psi_star_{k}"));
        cols.push(d.psi_star);
    }
    let mut table = Table::with_headers("psi_star", headers);
    for (i, x) in s.grid.nodes.iter().enumerate() {
        let mut row = vec![*x];
        row.extend(cols.iter().map(|c| c[i]));
        table.push(row);
    }
    Ok(Report::new(json!({ "roots": roots, "points": out })).table(table))
}

pub fn hopf(s: &Setup) -> Res<Report> {
    let lambda = s.lambda()?;
    let coeffs = s.coefficients()?;
    let st = s.steady(&coeffs, lambda)?;
    let theta_amp = amplitude(&s.grid, s.eig()?, &st.u_star);
    let rungs = s.cfg.task.rungs.unwrap_or(5);
    let h = crossing_data(&coeffs, theta_amp, rungs)?;
    let stability = s.cfg.task.sigma.map(|sg| classify_gamma0_stability(&coeffs, lambda, sg, Some(&h)));
    let mut table = Table::new("ladder", &["n", "sigma", "transversality", "xi_re", "xi_im"]);
    for n in 0..=rungs {
        table.push(vec![n as f64, h.sigma_ladder[n], h.transversality[n], h.xi_limit[n].0, h.xi_limit[n].1]);
    }
    let result = json!({
        "lambda": lambda,
        "lambda1": s.eig()?.lambda1,
        "delta_star": h.delta_star,
        "theta_star": h.theta_star,
        "omega": h.omega,
        "theta_amp": h.theta_amp,
        "sigma_ladder": h.sigma_ladder,
        "transversality": h.transversality,
        "xi_limit": h.xi_limit,
        "hopf_possible": h.hopf_possible,
        "stability": stability,
    });
    Ok(Report::new(result).table(table))
}

pub fn spectrum(s: &Setup) -> Res<Report> {
    let lin = linearize(s)?;
    let sigma = s.cfg.task.sigma.unwrap_or(0.0);
    let grid: Vec<f64> = if sigma > 0.0 { vec![0.0, sigma] } else { vec![0.0] };
    let sw = continue_in_sigma(&lin.pair, &grid, &s.cfg.spectrum_options())?;
    let last = sw.results.last().expect("non-empty grid");
    let mut table = Table::new("eigenvalues", &["re", "im"]);
    for (re, im) in &last.eigenvalues {
        table.push(vec![*re, *im]);
    }
    let below: Vec<Value> = sw.crossings.iter().filter(|c| c.sigma <= sigma).map(crossing_json).collect();
    let result = json!({
        "lambda": lin.lambda,
        "sigma": sigma,
        "unstable_count": last.unstable_count,
        "rightmost": last.eigenvalues.first(),
        "crossings_below": below,
        "count_radius": sw.count_radius,
    });
    Ok(Report::new(result).table(table))
}

/// Rough delay scale `2 pi / |theta delta|` with `delta` taken from `|kappa (4 kappa0 - kappa)|`.
pub fn delay_scale(coeffs: &BifCoefficients, theta_amp: f64) -> Option<f64> {
    let disc = coeffs.kappa * (4.0 * coeffs.kappa0 - coeffs.kappa);
    let w = (theta_amp * disc.abs().sqrt() / 2.0).abs();
    (w > 0.0 && w.is_finite()).then(|| 2.0 * PI / w)
}

pub struct SweepOutcome {
    pub sweep: SigmaSweep,
    pub sigma_max: f64,
    pub profile: Vec<(f64, usize)>,
    pub predicted: Option<f64>,
}

pub fn run_sweep(s: &Setup, lin: &Linearized) -> Res<SweepOutcome> {
    let t = &s.cfg.task;
    let opts = s.cfg.spectrum_options();
    let sigma_max = match t.sigma_max {
        Some(v) => v,
        None => {
            let th = theta_sweep(&lin.pair, &opts);
            let scale = delay_scale(&lin.coeffs, lin.theta_amp).unwrap_or(100.0);
            let cr = crossings(&lin.pair, &th, 20.0 * scale);
            match cr.len() {
                0 => 5.0 * scale,
                1 => 2.0 * cr[0].sigma,
                _ => 1.2 * cr[1].sigma,
            }
        }
    };
    let count = t.sigma_count.unwrap_or(61);
    let grid: Vec<f64> = (0..count).map(|k| sigma_max * k as f64 / (count - 1) as f64).collect();
    let sweep = continue_in_sigma(&lin.pair, &grid, &opts)?;
    let profile = unstable_count_profile(&sweep)?;
    let predicted = crossing_data(&lin.coeffs, lin.theta_amp, 0).ok().filter(|h| h.hopf_possible).map(|h| h.sigma_ladder[0]);
    Ok(SweepOutcome { sweep, sigma_max, profile, predicted })
}

fn sweep_table(name: &str, sw: &SigmaSweep) -> Table {
    let mut table = Table::new(name, &["sigma", "rightmost_re", "rightmost_im", "unstable_count"]);
    for r in &sw.results {
        let (re, im) = r.eigenvalues.first().copied().unwrap_or((f64::NAN, f64::NAN));
        table.push(vec![r.sigma, re, im, r.unstable_count as f64]);
    }
    table
}

fn sweep_json(lin: &Linearized, o: &SweepOutcome) -> Value {
    let first = o.sweep.bisected.first().copied();
    json!({
        "lambda": lin.lambda,
        "coefficients": lin.coeffs,
        "theta_amp": lin.theta_amp,
        "sigma_max": o.sigma_max,
        "counts": o.profile.iter().map(|p| p.1).collect::<Vec<_>>(),
        "count_changes": o.sweep.bisected,
        "crossings": o.sweep.crossings.iter().map(crossing_json).collect::<Vec<_>>(),
        "predicted_sigma": o.predicted,
        "first_crossing_relative_error": match (first, o.predicted) {
            (Some(a), Some(b)) => Some((a - b) / b),
            _ => None,
        },
        "count_radius": o.sweep.count_radius,
        "lost_branches": o.sweep.lost_branches,
    })
}

pub fn sweep_sigma(s: &Setup) -> Res<Report> {
    let lin = linearize(s)?;
    let o = run_sweep(s, &lin)?;
    Ok(Report::new(sweep_json(&lin, &o)).table(sweep_table("sweep", &o.sweep)))
}

pub struct SimulationPlan {
    pub sigma: f64,
    pub t_end: f64,
    pub crossing: Option<Crossing>,
}

pub fn plan_simulation(s: &Setup, lin: &Linearized) -> Res<SimulationPlan> {
    let t = &s.cfg.task;
    let needs_crossing = t.sigma_rel.is_some() || (t.t_end.is_none() && t.t_periods.is_some());
    let crossing = if needs_crossing {
        let th = theta_sweep(&lin.pair, &s.cfg.spectrum_options());
        Some(first_crossing(&lin.pair, &th).ok_or_else(|| Error::OutOfRegime("no imaginary-axis crossing".into()))?)
    } else {
        None
    };
    let sigma = match (t.sigma, t.sigma_rel) {
        (Some(v), _) => v,
        (None, Some(r)) => r * crossing.as_ref().expect("computed").sigma,
        (None, None) => 0.0,
    };
    let t_end = match (t.t_end, t.t_periods) {
        (Some(v), _) => v,
        (None, Some(p)) => p * 2.0 * PI / crossing.as_ref().expect("computed").omega,
        (None, None) => return Err(missing("task.t_end", "`t_end` or `t_periods`")),
    };
    Ok(SimulationPlan { sigma, t_end, crossing })
}

pub fn simulate_at(s: &Setup, lin: &Linearized, sigma: f64, t_end: f64) -> Res<Trajectory> {
    let t = &s.cfg.task;
    let eps = t.perturbation.unwrap_or(1e-3);
    let init = &lin.steady.u_star + &s.eig()?.phi1 * eps;
    let probes = if t.probes.is_empty() { vec![0.5 * s.grid.length, 0.0, s.grid.length] } else { t.probes.clone() };
    let opts = IntegrateOptions {
        dt: t.dt,
        probes,
        reference: Some(lin.steady.u_star.clone()),
        audit_mass: true,
        snapshot_times: t.snapshot_times.clone(),
        ..Default::default()
    };
    Ok(integrate(&s.grid, &s.model, lin.lambda, sigma, &init, t_end, &opts)?)
}

fn trajectory_table(name: &str, tr: &Trajectory) -> Table {
    let mut headers = vec!["t".to_string(), "mean".to_string(), "max".to_string()];
    headers.extend(tr.probe_x.iter().map(|x| format!("u(x={x})")));
    let mut table = Table::with_headers(name, headers);
    for j in 0..tr.times.len() {
        let mut row = vec![tr.times[j], tr.mean[j], tr.max[j]];
        row.extend(tr.probes.iter().map(|p| p[j]));
        table.push(row);
    }
    table
}

fn trajectory_json(tr: &Trajectory, sigma: f64, t_end: f64) -> Value {
    json!({
        "sigma": sigma,
        "t_end": t_end,
        "classification": tr.classification,
        "period": tr.period,
        "amplitude": tr.amplitude,
        "min_value": tr.min_value,
        "final_distance": tr.final_distance,
        "mass_defect": tr.mass_defect,
        "dt": tr.dt,
        "steps": tr.steps,
        "snapshot_times": tr.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(),
    })
}

pub fn simulate(s: &Setup) -> Res<Report> {
    let lin = linearize(s)?;
    let plan = plan_simulation(s, &lin)?;
    let tr = simulate_at(s, &lin, plan.sigma, plan.t_end)?;
    let mut result = trajectory_json(&tr, plan.sigma, plan.t_end);
    result["lambda"] = json!(lin.lambda);
    if let Some(c) = &plan.crossing {
        result["crossing"] = crossing_json(c);
        result["spectral_period"] = json!(2.0 * PI / c.omega);
    }
    let mut report = Report::new(result).table(trajectory_table("trajectory", &tr));
    for (k, (_, u)) in tr.snapshots.iter().enumerate() {
        report = report.table(s.field_table(&format!("snapshot_{k}"), "u", u));
    }
    Ok(report)
}

/// Scenario names accepted by `reproduce`.
pub const SCENARIOS: &[&str] = &["hopf-switch", "no-hopf"];

pub fn label(c: Classification) -> &'static str {
    match c {
        Classification::ConvergedToSteady => "Stable",
        Classification::SustainedOscillation => "Oscillating",
        Classification::Diverged => "Diverged",
        Classification::Undetermined => "Undetermined",
    }
}

/// Sweep in sigma, then simulate at 0.9 and 1.1 times the first crossing.
pub fn reproduce_hopf_switch(s: &Setup, threads: usize) -> Res<Report> {
    let lin = linearize(s)?;
    let o = run_sweep(s, &lin)?;
    let first = o.sweep.crossings.first().cloned().ok_or_else(|| Error::OutOfRegime("no imaginary-axis crossing".into()))?;
    let periods = s.cfg.task.t_periods.unwrap_or(60.0);
    let t_end = periods * 2.0 * PI / first.omega;
    let factors = [0.9, 1.1];
    let runs: Vec<Res<Trajectory>> = if threads > 1 {
        std::thread::scope(|sc| {
            let (lin, sc_sigma) = (&lin, first.sigma);
            let hs: Vec<_> = factors.iter().map(|&f| sc.spawn(move || simulate_at(s, lin, f * sc_sigma, t_end))).collect();
            hs.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
        })
    } else {
        factors.iter().map(|f| simulate_at(s, &lin, f * first.sigma, t_end)).collect()
    };
    let mut runs = runs.into_iter();
    let below = runs.next().expect("two runs")?;
    let above = runs.next().expect("two runs")?;
    let period = 2.0 * PI / first.omega;
    let sim = |tr: &Trajectory, f: f64| {
        let mut v = trajectory_json(tr, f * first.sigma, t_end);
        v["label"] = json!(label(tr.classification));
        v["period_relative_error"] = json!(tr.period.map(|p| (p - period) / period));
        v
    };
    let result = json!({
        "scenario": "hopf-switch",
        "sweep": sweep_json(&lin, &o),
        "spectral_period": period,
        "below": sim(&below, 0.9),
        "above": sim(&above, 1.1),
    });
    Ok(Report::new(result)
        .table(sweep_table("sweep", &o.sweep))
        .table(trajectory_table("traj_below", &below))
        .table(trajectory_table("traj_above", &above)))
}

/// The configured model with and without memory: constant counts, no crossing.
pub fn reproduce_no_hopf(s: &Setup) -> Res<Report> {
    let mut report = Report::new(json!({ "scenario": "no-hopf" }));
    let mut cases = Vec::new();
    for (tag, d) in [("memory", s.model.d), ("no_memory", 0.0)] {
        let mut cfg = s.cfg.clone();
        cfg.model.d = d;
        let sub = Setup::new(&cfg)?;
        let lin = linearize(&sub)?;
        let scale = delay_scale(&lin.coeffs, lin.theta_amp);
        if cfg.task.sigma_max.is_none() {
            cfg.task.sigma_max = Some(5.0 * scale.unwrap_or(100.0));
        }
        let sub = Setup { cfg, ..sub };
        let o = run_sweep(&sub, &lin)?;
        let constant = o.profile.windows(2).all(|w| w[0].1 == w[1].1);
        let mut v = sweep_json(&lin, &o);
        v["d"] = json!(d);
        v["hopf_discriminant"] = json!(lin.coeffs.kappa * (4.0 * lin.coeffs.kappa0 - lin.coeffs.kappa));
        v["constant_count"] = json!(constant);
        v["delay_scale"] = json!(scale);
        cases.push((tag, v));
        report = report.table(sweep_table(&format!("sweep_{tag}"), &o.sweep));
    }
    for (tag, v) in cases {
        report.result[tag] = v;
    }
    Ok(report)
}
