use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input file could not be read or parsed.
    #[error("failed to load {path}: {msg}")]
    Load {
        /// File that failed.
        path: PathBuf,
        /// What went wrong.
        msg: String,
    },
    /// A dataset violated one of its structural invariants.
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Two inputs that must agree in shape do not.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A series has zero variance where a positive variance is required.
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    /// Not enough data to perform an operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// A numerical routine failed (singular system, optimizer failure, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Training produced a non-finite loss or activation.
    #[error("training diverged: {0}")]
    Diverged(String),
    /// Filesystem error with the offending path.
    #[error("i/o error at {path}: {source}")]
    Io {
        /// Path involved in the failing operation.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// Serialization of a report, checkpoint or model failed.
    #[error("serialization error: {0}")]
    Serde(String),
}

/// Convenience alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Short machine-readable category name, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Load { .. } => "load",
            Error::InvalidData(_) => "invalid_data",
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::ZeroVariance(_) => "zero_variance",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Numerical(_) => "numerical",
            Error::Diverged(_) => "diverged",
            Error::Io { .. } => "io",
            Error::Serde(_) => "serde",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
