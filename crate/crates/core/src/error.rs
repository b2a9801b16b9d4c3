use thiserror::Error;

/// Errors raised by the structuring pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cannot linearize grade-0 polynomial")]
    GradeZero,

    #[error("expected {expected} scaling factors, got {got}")]
    ScalarCount { expected: usize, got: usize },

    #[error("perturbation not structured: unstructured residue {residue:e} exceeds {tol:e}")]
    NotStructured { residue: f64, tol: f64 },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite values in least-squares operator or right-hand side")]
    NonFinite,

    #[error("singular value decomposition failed to converge")]
    Svd,

    #[error("oracle refused instance with {unknowns} unknowns (limit {limit})")]
    OracleTooLarge { unknowns: usize, limit: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
