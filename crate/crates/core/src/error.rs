use std::path::PathBuf;

/// Errors produced by the d2lv library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The stream does not look like the expected format (magic, version, header).
    #[error("format error: {0}")]
    Format(String),
    /// The stream ended before the declared payload.
    #[error("truncated input: {0}")]
    Truncation(String),
    /// The payload parsed but violates an invariant (non-finite float, bad norm, duplicate key).
    #[error("corrupt data: {0}")]
    Corruption(String),
    /// Invalid configuration or mismatched inputs.
    #[error("config error: {0}")]
    Config(String),
    /// Argument outside the domain of a numeric function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A training batch cannot be formed from the given labels.
    #[error("batch error: {0}")]
    Batch(String),
    /// Invalid value for a domain type (id, box, image).
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Truncation(_) => "truncation",
            Error::Corruption(_) => "corruption",
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Batch(_) => "batch",
            Error::Invalid(_) => "invalid",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
