use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or configuration value violates its contract. `path` is the
    /// dotted key path into the configuration document (e.g. `panel.n_h`).
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    /// Floating-point failure: non-finite values, decomposition breakdown,
    /// or a residue that should vanish but did not.
    #[error("numerical failure{}: {message}", order.map(|n| format!(" (matrix order {n})")).unwrap_or_default())]
    Numeric {
        message: String,
        order: Option<usize>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric {
            message: message.into(),
            order: None,
        }
    }

    /// Configuration and argument problems are the caller's fault; everything
    /// else is a numerical (or I/O) failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidArgument(_) | Error::IndexOutOfRange { .. }
        )
    }
}
