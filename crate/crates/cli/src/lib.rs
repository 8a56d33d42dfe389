//! Library side of the `memdiff` command-line tool.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod output;

use std::path::{Path, PathBuf};

use serde_json::Value;

pub use config::RunConfig;
pub use error::CliError;
pub use output::{Report, Table};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Eigen,
    Steady,
    Branch,
    Coeffs,
    Gamma1,
    Hopf,
    Spectrum,
    SweepSigma,
    Simulate,
    Reproduce,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Steady => "steady",
            Command::Branch => "branch",
            Command::Coeffs => "coeffs",
            Command::Gamma1 => "gamma1",
            Command::Hopf => "hopf",
            Command::Spectrum => "spectrum",
            Command::SweepSigma => "sweep-sigma",
            Command::Simulate => "simulate",
            Command::Reproduce => "reproduce",
        }
    }
}

/// Built-in configuration for a `reproduce` scenario.
pub fn scenario_config(name: &str) -> Result<RunConfig, CliError> {
    let d = match name {
        "hopf-switch" => 10.0,
        "no-hopf" => 1.0,
        _ => {
            return Err(CliError::Config {
                path: "scenario".into(),
                message: format!("unknown scenario `{name}`; expected one of {:?}", commands::SCENARIOS),
            })
        }
    };
    let rel = if name == "hopf-switch" { 0.2 } else { 0.05 };
    let text = format!(
        r#"{{
  "model": {{
    "builtin": {{ "name": "logistic_heterogeneous",
                 "m": {{ "kind": "sum", "terms": [ {{ "kind": "cos", "k": 1.0, "amp": 1.0 }}, {{ "kind": "const", "value": -0.2 }} ] }} }},
    "r0": 0.0, "r1": 0.0, "d": {d}
  }},
  "grid": {{ "length": 1.0, "n": 128 }},
  "task": {{ "lambda_rel": {rel} }}
}}"#
    );
    config::parse(&text)
}

/// Runs one command and returns its report. `scenario` is used by `reproduce` only.
pub fn execute(command: Command, cfg: &RunConfig, scenario: Option<&str>, threads: usize) -> Result<Report, CliError> {
    let setup = commands::Setup::new(cfg)?;
    match command {
        Command::Eigen => commands::eigen(&setup),
        Command::Steady => commands::steady(&setup),
        Command::Branch => commands::branch(&setup),
        Command::Coeffs => commands::coeffs(&setup),
        Command::Gamma1 => commands::gamma1(&setup),
        Command::Hopf => commands::hopf(&setup),
        Command::Spectrum => commands::spectrum(&setup),
        Command::SweepSigma => commands::sweep_sigma(&setup),
        Command::Simulate => commands::simulate(&setup),
        Command::Reproduce => match scenario {
            Some("hopf-switch") => commands::reproduce_hopf_switch(&setup, threads),
            Some("no-hopf") => commands::reproduce_no_hopf(&setup),
            Some(other) => Err(CliError::Config {
                path: "scenario".into(),
                message: format!("unknown scenario `{other}`; expected one of {:?}", commands::SCENARIOS),
            }),
            None => Err(CliError::Config { path: "scenario".into(), message: "reproduce needs a scenario name".into() }),
        },
    }
}

/// Full pipeline: load, execute, write. Returns the summary written to disk.
pub fn run(
    command: Command,
    config_path: Option<&Path>,
    out: Option<&Path>,
    scenario: Option<&str>,
    threads: usize,
) -> Result<Value, CliError> {
    let mut cfg = match (config_path, command, scenario) {
        (Some(p), _, _) => config::load(p)?,
        (None, Command::Reproduce, Some(s)) => scenario_config(s)?,
        (None, _, _) => return Err(CliError::Config { path: "--config".into(), message: "a config file is required".into() }),
    };
    if let Some(o) = out {
        cfg.output.dir = Some(o.to_path_buf());
    }
    let dir: PathBuf = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let report = execute(command, &cfg, scenario, threads)?;
    let name = match (command, scenario) {
        (Command::Reproduce, Some(s)) => format!("reproduce_{s}"),
        _ => command.name().to_string(),
    };
    let (summary, _) = output::write(&dir, &name, &cfg, &report)?;
    Ok(summary)
}
