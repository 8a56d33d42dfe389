//! JSON run configuration.

use std::path::{Path, PathBuf};

use memdiff_core::steady::NewtonOptions;
use memdiff_core::{BuiltinModel, Grid1D, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::expr::ExprModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub task: TaskBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomBlock>,
    pub r0: f64,
    pub r1: f64,
    #[serde(default)]
    pub d: f64,
}

/// Expression strings in the variables `x`, `u`, `L` and `pi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomBlock {
    pub f: String,
    pub g: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_u: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_uu: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_u: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_uu: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_uuu: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "default_n")]
    pub n: i64,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { length: 1.0, n: default_n() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    #[serde(default = "crossing_tol")]
    pub crossing_tol: f64,
    #[serde(default = "tracked")]
    pub tracked: usize,
    #[serde(default = "theta_steps")]
    pub theta_steps: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            newton_tol: newton_tol(),
            max_iter: max_iter(),
            crossing_tol: crossing_tol(),
            tracked: tracked(),
            theta_steps: theta_steps(),
        }
    }
}

/// Command parameters. Unused fields are ignored by commands that do not need them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBlock {
    /// Absolute lambda.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// `lambda = lambda1 (1 + lambda_rel)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_rel: Option<f64>,
    /// Branch points, relative to lambda1 like `lambda_rel`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas_rel: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// `sigma = sigma_rel * sigma_c` with `sigma_c` the first spectral crossing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// End time in periods `2 pi / omega_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s_values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rungs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "formats")]
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: None, formats: formats() }
    }
}

fn one() -> f64 {
    1.0
}
fn default_n() -> i64 {
    128
}
fn newton_tol() -> f64 {
    1e-11
}
fn max_iter() -> usize {
    50
}
fn crossing_tol() -> f64 {
    1e-8
}
fn tracked() -> usize {
    20
}
fn theta_steps() -> usize {
    720
}
fn formats() -> Vec<String> {
    vec!["json".into(), "csv".into()]
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config { path, message: e.into_inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: ".".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse(&text)
}

fn bad(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: message.into() }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.model.builtin, &self.model.custom) {
            (Some(_), Some(_)) => return Err(bad("model", "give either `builtin` or `custom`, not both")),
            (None, None) => return Err(bad("model", "one of `builtin` or `custom` is required")),
            _ => {}
        }
        for (p, v) in [("model.r0", self.model.r0), ("model.r1", self.model.r1), ("model.d", self.model.d)] {
            if !v.is_finite() {
                return Err(bad(p, "must be finite"));
            }
        }
        if self.grid.n < 16 {
            return Err(bad("grid.n", format!("must be at least 16, got {}", self.grid.n)));
        }
        if !(self.grid.length > 0.0) || !self.grid.length.is_finite() {
            return Err(bad("grid.length", "must be positive"));
        }
        let s = &self.solver;
        for (p, v) in [("solver.newton_tol", s.newton_tol), ("solver.crossing_tol", s.crossing_tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(bad(p, "tolerance must be positive"));
            }
        }
        if s.max_iter == 0 {
            return Err(bad("solver.max_iter", "must be positive"));
        }
        if s.theta_steps < 16 {
            return Err(bad("solver.theta_steps", "must be at least 16"));
        }
        if s.tracked == 0 {
            return Err(bad("solver.tracked", "must be positive"));
        }
        let t = &self.task;
        if t.lambda.is_some() && t.lambda_rel.is_some() {
            return Err(bad("task", "give either `lambda` or `lambda_rel`, not both"));
        }
        if t.sigma.is_some() && t.sigma_rel.is_some() {
            return Err(bad("task", "give either `sigma` or `sigma_rel`, not both"));
        }
        let positive = |p: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0) || !x.is_finite() => Err(bad(p, "must be positive")),
            _ => Ok(()),
        };
        positive("task.sigma_max", t.sigma_max)?;
        positive("task.t_end", t.t_end)?;
        positive("task.t_periods", t.t_periods)?;
        positive("task.dt", t.dt)?;
        positive("task.sigma_rel", t.sigma_rel)?;
        if let Some(sg) = t.sigma {
            if !(sg >= 0.0) || !sg.is_finite() {
                return Err(bad("task.sigma", "must be non-negative"));
            }
        }
        if let Some(c) = t.sigma_count {
            if c < 2 {
                return Err(bad("task.sigma_count", "must be at least 2"));
            }
        }
        if let Some([a, b]) = t.bracket {
            if !(a < b) {
                return Err(bad("task.bracket", "needs a < b"));
            }
        }
        for (k, x) in t.probes.iter().enumerate() {
            if !(*x >= 0.0 && *x <= self.grid.length) {
                return Err(bad(&format!("task.probes[{k}]"), "probe must lie in [0, L]"));
            }
        }
        if let Some(o) = &t.origin {
            if o != "gamma0" && o != "gamma_u1" {
                return Err(bad("task.origin", "expected `gamma0` or `gamma_u1`"));
            }
        }
        for (k, f) in self.output.formats.iter().enumerate() {
            if f != "json" && f != "csv" {
                return Err(bad(&format!("output.formats[{k}]"), "expected `json` or `csv`"));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Ok(Grid1D::new(self.grid.n as usize, self.grid.length)?)
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let l = self.grid.length;
        if let Some(b) = &m.builtin {
            return Ok(ModelSpec::builtin(b.clone(), m.r0, m.r1, m.d, l)?);
        }
        let c = m.custom.as_ref().expect("validated");
        let model = ExprModel::compile(c, l)?.into_custom();
        Ok(ModelSpec::custom(model, m.r0, m.r1, m.d, l)?)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.solver.newton_tol, max_iter: self.solver.max_iter, ..Default::default() }
    }

    pub fn spectrum_options(&self) -> memdiff_core::spectrum::SpectrumOptions {
        memdiff_core::spectrum::SpectrumOptions {
            tracked: self.solver.tracked,
            crossing_tol: self.solver.crossing_tol,
            theta_steps: self.solver.theta_steps,
            ..Default::default()
        }
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }
}
