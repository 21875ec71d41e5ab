use thiserror::Error;

/// Errors raised across the regulator, GP and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {message} (size {size}, diag range [{min_diag:.3e}, {max_diag:.3e}])")]
    Factorization {
        message: String,
        size: usize,
        min_diag: f64,
        max_diag: f64,
    },

    #[error("simulation diverged at t = {t:.6}: {message}")]
    Divergence { t: f64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input or IO).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Factorization { .. } | Error::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
