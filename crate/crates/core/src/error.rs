use thiserror::Error;

/// Errors raised by the geometry kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector is (numerically) zero: |y| = {norm:e}")]
    ZeroVector { norm: f64 },

    #[error("covector is (numerically) zero: |xi| = {norm:e}")]
    ZeroCovector { norm: f64 },

    #[error("norm value {value} is not positive")]
    NotInDomain { value: f64 },

    #[error("fundamental tensor is degenerate: {0}")]
    DegenerateMetric(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("critical point: F*(df) = {fstar:e} below threshold")]
    CriticalPoint { fstar: f64 },

    #[error("symmetric eigen-decomposition failed: {0}")]
    EigenFailure(String),

    #[error("vectors are not g_y-orthogonal (|g_y(u, v)| = {value:e})")]
    NotOrthogonal { value: f64 },

    #[error("direction is not F-unit: F(y) = {value}")]
    NotUnit { value: f64 },

    #[error("level {level} not reached in {skipped} of {total} directions")]
    LevelNotReached { level: f64, skipped: usize, total: usize },

    #[error("critical point on level {level}")]
    CriticalPointOnLevel { level: f64 },

    #[error("level {level} lies outside the regular range ({lo}, {hi})")]
    LevelOutOfRange { level: f64, lo: f64, hi: f64 },

    #[error("field is not isoparametric: {0}")]
    NotIsoparametric(String),

    #[error("need at least {needed} levels, got {got}")]
    InsufficientLevels { needed: usize, got: usize },

    #[error("flow left the regular region at f = {level}")]
    LeftRegularRegion { level: f64 },

    #[error("reparametrization is not increasing at t = {t} (phi' = {slope})")]
    NotMonotone { t: f64, slope: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
