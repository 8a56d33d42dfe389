use memdiff_core::error::ErrorClass;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Core(#[from] memdiff_core::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl CliError {
    /// 2 validation, 3 solver, 4 regime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Output(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Solver => 3,
                ErrorClass::Regime => 4,
            },
        }
    }

    pub fn to_json(&self) -> Value {
        let (code, path) = match self {
            CliError::Config { path, .. } => ("Config", Some(path.clone())),
            CliError::Core(e) => (e.code(), None),
            CliError::Output(_) => ("Output", None),
        };
        json!({
            "schema_version": crate::SCHEMA_VERSION,
            "error": {
                "code": code,
                "exit_code": self.exit_code(),
                "path": path,
                "message": self.to_string(),
            }
        })
    }
}
