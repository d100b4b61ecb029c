use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The probability distribution or constraint collapsed to a point mass.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A non-finite integrand value was produced at `abscissa`.
    #[error("integrand not finite at t = {abscissa}")]
    NonFiniteIntegrand { abscissa: f64 },

    /// The adaptive rule ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: estimated error {estimated_error:e} after {subdivisions} subdivisions")]
    QuadratureFailed {
        estimated_error: f64,
        subdivisions: usize,
    },

    /// A matrix that must be symmetric positive definite was not.
    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("rank deficient system: {0}")]
    Rank(String),

    /// No parameter or hyperparameter satisfies the constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("iteration did not converge: {0}")]
    NotConverged(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Classifies the error into the process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible(_) => 2,
            Error::NonFiniteIntegrand { .. }
            | Error::QuadratureFailed { .. }
            | Error::Decomposition(_)
            | Error::Rank(_)
            | Error::NotConverged(_)
            | Error::Degenerate(_) => 3,
            Error::Domain(_)
            | Error::DimensionMismatch { .. }
            | Error::Unsupported(_)
            | Error::Config(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
