//! Result envelopes and CSV tables.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Self { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_headers(name: &str, headers: Vec<String>) -> Self {
        Self { name: name.into(), headers, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:e}")))?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }
}

/// What a command hands back: a JSON result and any number of tables.
#[derive(Debug, Clone)]
pub struct Report {
    pub result: Value,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(result: Value) -> Self {
        Self { result, tables: Vec::new() }
    }

    pub fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

/// sha256 over the model, grid, solver and task blocks.
pub fn config_hash(cfg: &RunConfig) -> String {
    let body = json!({ "model": cfg.model, "grid": cfg.grid, "solver": cfg.solver, "task": cfg.task });
    let bytes = serde_json::to_vec(&body).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

pub fn envelope(command: &str, cfg: &RunConfig, report: &Report, artifacts: &[String]) -> Value {
    json!({
        "schema_version": crate::SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "artifacts": artifacts,
        "result": report.result,
    })
}

/// Writes every table and the summary. Returns the summary and the written paths.
pub fn write(dir: &Path, command: &str, cfg: &RunConfig, report: &Report) -> Result<(Value, Vec<PathBuf>), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config {
        path: "output.dir".into(),
        message: format!("cannot create {}: {e}", dir.display()),
    })?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    if cfg.wants("csv") {
        for t in &report.tables {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.to_csv()?)?;
            names.push(format!("{}.csv", t.name));
            written.push(p);
        }
    }
    let summary = envelope(command, cfg, report, &names);
    if cfg.wants("json") {
        let p = dir.join(format!("{command}.json"));
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        std::fs::write(&p, text)?;
        written.push(p);
    }
    Ok((summary, written))
}
