//! Command-line front end: regenerates the experiment data as CSV or JSON,
//! each file carrying a manifest of how it was produced.

pub mod args;
pub mod commands;
pub mod output;

use thiserror::Error;

pub use args::{Cli, Command};
pub use commands::run;
pub use output::{Cell, Manifest, Table};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MDSHRINK_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] mdshrink::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Parses the thread cap from the environment value, if any.
pub fn parse_threads(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}
