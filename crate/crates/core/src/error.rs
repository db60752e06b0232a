use thiserror::Error;

/// Errors surfaced by the segmentation library.
#[derive(Error, Debug)]
pub enum Error {
    /// A hyperparameter or domain-type invariant was violated.
    #[error("invalid {field}: {message}")]
    Validation {
        field: &'static str,
        message: String,
    },

    /// Cholesky factorization of a covariance matrix failed; `minor` is the
    /// order of the first non-positive-definite leading principal minor.
    #[error("covariance factorization failed at leading minor {minor}")]
    Factorization { minor: usize },

    /// A forward lattice column carried no feasible mass.
    #[error("no feasible segmentation at timestep {timestep}")]
    InfeasibleLattice { timestep: usize },

    /// Wraps an infeasible-lattice (or other) failure with training context.
    #[error("sequence {sequence:?}, iteration {iteration}: {source}")]
    Train {
        sequence: String,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed input data (CSV cell, schema mismatch, empty sequence, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Bad run or generator configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            field,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }
}
