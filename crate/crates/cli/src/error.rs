use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("solver stopped after {iterations} iterations at relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] mgspline_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        use mgspline_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 3,
            Self::Malformed { .. } | Self::Json(_) => 4,
            Self::NotConverged { .. } => 7,
            Self::Core(e) => match e {
                E::Parameter(_) => 2,
                E::OutOfDomain { .. } | E::DataOutsideDomain { .. } | E::Shape { .. } => 4,
                E::Capacity { .. } => 5,
                E::Divergence { .. } | E::Numeric { .. } => 6,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
