use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A spec or dataset failed validation (non-unit direction, bad sizes, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The n x n Gram matrix was numerically singular.
    #[error("singular Gram matrix (smallest eigenvalue {min_eig:.3e})")]
    SingularGram { min_eig: f64 },

    /// The hard-margin solver stopped before certifying optimality.
    #[error("solver did not converge: best relative duality gap {gap:.3e} after {epochs} epochs")]
    SolverStalled { gap: f64, epochs: usize },

    /// Training produced a non-finite objective.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// A root-finding bracket did not change sign.
    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
