use thiserror::Error;

/// Errors produced anywhere in the laboratory.
///
/// The variants group failures by how a caller should react: bad input
/// ([`Error::Validation`], [`Error::Precondition`], [`Error::Size`]), a solver
/// that ran out of iterations ([`Error::Convergence`]), floating-point
/// breakdown ([`Error::Numerical`]) and file-system trouble ([`Error::Io`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e}): {context}")]
    Convergence {
        context: String,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Precondition(_) | Error::Size(_) => 2,
            Error::Convergence { .. } | Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
