use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent feeder topology.
    #[error("model error: {0}")]
    Model(String),

    /// Newton-Raphson hit its iteration cap.
    #[error("load flow diverged after {iterations} iterations (max mismatch {residual:e} pu)")]
    Divergence { iterations: usize, residual: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A vehicle cannot reach its required state of charge before departure.
    #[error("vehicle {vehicle} cannot reach its required charge: {detail}")]
    Infeasible { vehicle: usize, detail: String },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Parse failure in a tabular input, addressed by file and line.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
