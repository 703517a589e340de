use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required input column is absent from the CSV header.
    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifact {}: run `{producer}` first", path.display())]
    MissingArtifact { path: PathBuf, producer: String },

    #[error("date {0} is outside the calendar range")]
    DateOutOfRange(chrono::NaiveDate),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 2 validation, 3 missing prerequisite, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingArtifact { .. } => 3,
            Error::Io { .. } | Error::Stream(_) => 4,
            Error::Csv(e) if e.is_io_error() => 4,
            _ => 2,
        }
    }

    /// Short machine-readable kind used in JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "schema",
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::MissingArtifact { .. } => "missing_prerequisite",
            Error::DateOutOfRange(_) => "date_out_of_range",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::Io { .. } | Error::Stream(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
