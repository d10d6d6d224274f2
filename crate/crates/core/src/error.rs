use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NonHermitianInput { defect: f64 },

    #[error(
        "matrix is indefinite: eigenvalue {min_eigenvalue:.3e} below tolerance {tolerance:.3e}"
    )]
    IndefiniteInput { min_eigenvalue: f64, tolerance: f64 },

    #[error("inner low-rank system is numerically singular (condition {condition:.3e})")]
    SingularInnerSystem { condition: f64 },

    #[error("max |x| = {x_max} violates the aliasing bound pi/delta_omega = {bound}")]
    AliasingViolation { x_max: f64, bound: f64 },

    #[error("kernel has imaginary residue {residue:.3e} above tolerance {tolerance:.3e}")]
    NonRealKernel { residue: f64, tolerance: f64 },

    #[error("reference matrix has zero norm")]
    ZeroReference,

    #[error("loss became non-finite at iteration {iteration}")]
    DivergedLoss { iteration: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
