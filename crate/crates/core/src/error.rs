use thiserror::Error;

/// Errors raised by the model, theory, solver and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem shape: {0}")]
    InvalidShape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("basis is not orthonormal (operator deviation {deviation:.3e} > {tolerance:.1e})")]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error(
        "(beta={beta}, eta={eta}) is outside the recoverable region: \
         phase-transition boundary beta_wc(eta)={boundary:.6}"
    )]
    AbovePhaseTransition { beta: f64, eta: f64, boundary: f64 },

    #[error("pole: {0}")]
    Pole(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("malformed input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error comes from user input (config, arguments, preconditions)
    /// rather than from a numerical or I/O failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidShape(_)
                | Error::InvalidArgument(_)
                | Error::DimensionMismatch(_)
                | Error::AbovePhaseTransition { .. }
                | Error::Config(_)
                | Error::Input(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
