use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("{0} contains no data rows")]
    EmptyFile(String),
    #[error("the shift grid is empty")]
    EmptyGrid,
    #[error("shift {0} leaves a non-positive value of y + c")]
    NonPositiveShift(f64),
    #[error(transparent)]
    Compute(#[from] maxspi::Error),
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    /// 1 for usage errors, 2 for everything found while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::EmptyFile(_) => "empty_file",
            CliError::EmptyGrid => "empty_grid",
            CliError::NonPositiveShift(_) => "non_positive_shift",
            CliError::Compute(_) => "computation",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}
