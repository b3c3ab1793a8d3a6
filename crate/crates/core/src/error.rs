use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative or quadrature routine stopped short of its target.
    #[error("accuracy not reached in {what}: value {value:e}, error estimate {achieved:e}")]
    Accuracy {
        what: String,
        value: f64,
        achieved: f64,
    },

    /// A bound could not be certified; `value` is the best uncertified answer.
    #[error("certification failed: {reason} (uncertified value {value})")]
    Certification { reason: String, value: f64 },

    /// The positive semidefinite constraint could not be met.
    #[error("infeasible: {reason} (minimum eigenvalue {min_eigenvalue:e})")]
    Infeasible { reason: String, min_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
