use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("parameter outside the supported domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge (log estimate {log_estimate}, relative error {rel_error:e})")]
    Quadrature { log_estimate: f64, rel_error: f64 },

    #[error("prior family {0} has no mixing density for g; use the fixed-g path")]
    DegenerateFamily(&'static str),

    #[error("models do not share the same reference model")]
    ReferenceMismatch,

    #[error("model space has 2^{p} models, above the enumeration guard 2^{guard}")]
    EnumerationGuard { p: usize, guard: usize },

    #[error("{0}")]
    Config(String),

    #[error("trace is missing {0} draws")]
    MissingDraws(&'static str),

    #[error("malformed trace file: {0}")]
    TraceFormat(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
