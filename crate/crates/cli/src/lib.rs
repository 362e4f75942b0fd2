//! Command-line experiment runner over the `operc` library.

pub mod commands;
pub mod config;
pub mod table;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{execute, Outcome};
pub use config::{resolve, Cli, Command, ExperimentConfig, Format};
pub use table::{Cell, ResultTable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("estimator error: {0}")]
    Estimator(operc::Error),
    #[error("output error: {0}")]
    Io(String),
}

impl From<operc::Error> for CliError {
    fn from(e: operc::Error) -> Self {
        match e {
            operc::Error::BlockSpec(msg) => CliError::Config(format!("block spec: {msg}")),
            operc::Error::BadProbability(_) => CliError::Config(e.to_string()),
            other => CliError::Estimator(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Estimator(_) | CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Estimator(_) => "estimator",
            CliError::Io(_) => "output",
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub const EXIT_INVARIANT: i32 = 3;

/// Write the table under `dir`: CSV (plus JSON when there is nested data)
/// or JSON alone.
pub fn write_outputs(table: &ResultTable, dir: &std::path::Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let name = &table.meta.command;
    let mut files = Vec::new();
    let mut put = |path: PathBuf, body: String| -> Result<(), CliError> {
        std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        files.push(path);
        Ok(())
    };
    match format {
        Format::Csv => {
            put(dir.join(format!("{name}.csv")), table.to_csv())?;
            if table.extra.is_some() {
                put(dir.join(format!("{name}.json")), table.to_json())?;
            }
        }
        Format::Json => put(dir.join(format!("{name}.json")), table.to_json())?,
    }
    Ok(files)
}

/// Rendered table in the chosen format.
pub fn render(table: &ResultTable, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    }
}
