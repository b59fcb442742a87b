use thiserror::Error;

/// CLI failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys or values.
    #[error("usage error: {0}")]
    Usage(String),
    /// Malformed or invalid input data.
    #[error("data error: {0}")]
    Data(String),
    /// Estimation, selection or generation failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<imave::Error> for CliError {
    fn from(e: imave::Error) -> Self {
        use imave::Error as E;
        match e {
            E::Validation(_) | E::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            E::Singular { .. } | E::NotPositiveDefinite | E::Domain(_) => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
