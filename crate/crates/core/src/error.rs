use thiserror::Error;

/// Errors surfaced by the learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    #[error("all |values| below threshold, support is empty")]
    EmptySupport,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate support: estimated kernel support is zero")]
    DegenerateSupport,

    #[error("quadrature did not reach tolerance {tol:e} (error estimate {err:e}, {panels} panels)")]
    QuadratureNoConvergence { tol: f64, err: f64, panels: usize },

    #[error("invalid dimension range: {0}")]
    InvalidRange(String),

    #[error("basis Gram matrix is numerically singular (condition {cond:e})")]
    SingularBasis { cond: f64 },

    #[error("Cholesky factorization failed: matrix not positive definite")]
    FactorizationFailure,

    #[error("no positive generalized eigenvalue")]
    NoPositiveSpectrum,

    #[error("zero truth kernel in the L2(rho) denominator")]
    ZeroTruth,

    #[error("time step violates the stability bound: dt^2 * 2*int(phi+) = {0:.3e} >= 4")]
    StabilityViolation(f64),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("every hypothesis space failed the basis rank check")]
    AllSpacesSingular,

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
