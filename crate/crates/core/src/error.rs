use std::path::PathBuf;

use thiserror::Error;

use crate::pairstats::SettingPair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible statistics for setting {setting}: p({a},{b}) = {value:e}")]
    InfeasibleStatistics {
        setting: SettingPair,
        a: u8,
        b: u8,
        value: f64,
    },

    /// No measurement setting found gives `S > 2`.
    #[error("no CHSH violation: best S = {s_max:.6}")]
    NoViolation { s_max: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("{}", ingestion_message(.file, .line, .message))]
    Ingestion {
        file: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn ingestion_message(file: &std::path::Path, line: &Option<usize>, message: &str) -> String {
    match line {
        Some(line) => format!("{}:{}: {}", file.display(), line, message),
        None => format!("{}: {}", file.display(), message),
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
