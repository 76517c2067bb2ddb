use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by every module of the toolkit.
///
/// Each variant maps to a stable, module-qualified code (see [`Error::code`])
/// and to a coarse class (configuration vs. data problem) used by front ends
/// to pick exit statuses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("schema error at row {row}: {message}")]
    Schema { row: u64, message: String },

    #[error("unknown column `{column}` in header of {}", path.display())]
    UnknownColumn { path: PathBuf, column: String },

    #[error("missing column `{column}` in {}: {hint}", path.display())]
    MissingColumn {
        path: PathBuf,
        column: String,
        hint: String,
    },

    #[error("parse error at line {line}, column `{column}`: {message}")]
    Parse { line: u64, column: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("group {group} has zero estimated positive rate in random traffic; the utility is undefined (collect more random traffic)")]
    DegenerateGroup { group: usize },

    #[error("degenerate utilities: mean utility is zero, relative metrics are undefined")]
    DegenerateUtilities,

    #[error("group {group} has default-traffic positive rate {rate} on the boundary of [0, 1]; delta-method variance is undefined")]
    BoundaryVariance { group: usize, rate: f64 },

    #[error("request {request} has {rows} rows, expected {expected}")]
    MalformedSession {
        request: usize,
        rows: usize,
        expected: usize,
    },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("{arm} fold {fold} is degenerate: group {group} has no positive rows in its random-traffic fold")]
    FoldDegenerate { arm: String, fold: usize, group: usize },

    #[error("unstable bootstrap: {discarded} of {total} replicates discarded (limit 10%)")]
    UnstableBootstrap { discarded: usize, total: usize },

    #[error("invalid pilot estimate: {0}")]
    InvalidPilot(String),

    #[error("insufficient random traffic for {0}")]
    InsufficientRandomTraffic(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{arm} arm: {source}")]
    Arm {
        arm: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_arm(self, arm: &str) -> Self {
        Error::Arm {
            arm: arm.to_string(),
            source: Box::new(self),
        }
    }

    /// Stable module-qualified error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "config.invalid",
            Error::Schema { .. } => "metrics.schema",
            Error::UnknownColumn { .. } => "ingest.unknown_column",
            Error::MissingColumn { .. } => "ingest.missing_column",
            Error::Parse { .. } => "ingest.parse",
            Error::InsufficientData(_) => "metrics.insufficient_data",
            Error::DegenerateGroup { .. } => "metrics.degenerate_group",
            Error::DegenerateUtilities => "metrics.degenerate_utilities",
            Error::BoundaryVariance { .. } => "inference.boundary_variance",
            Error::MalformedSession { .. } => "metrics.malformed_session",
            Error::Unsupported(_) => "metrics.unsupported_input",
            Error::FoldDegenerate { .. } => "inference.fold_degenerate",
            Error::UnstableBootstrap { .. } => "inference.unstable_bootstrap",
            Error::InvalidPilot(_) => "planner.invalid_pilot",
            Error::InsufficientRandomTraffic(_) => "ingest.insufficient_random_traffic",
            Error::Precondition(_) => "synthetic.precondition",
            Error::Arm { source, .. } => source.code(),
            Error::Io { .. } => "io",
            Error::Csv(_) => "ingest.csv",
        }
    }

    /// True when the error stems from invalid configuration or flags rather
    /// than from the data itself.
    pub fn is_config(&self) -> bool {
        match self {
            Error::InvalidConfig(_) | Error::MissingColumn { .. } | Error::InvalidPilot(_) | Error::Precondition(_) => {
                true
            }
            Error::Arm { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
