use thiserror::Error;

/// Errors raised by the numerical routines of the toolkit.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dense path requested for dimension {dim} above the dense limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("eigenvalue {eigenvalue} lies within {distance:e} of the interval boundary {boundary}")]
    BoundaryEigenvalue {
        eigenvalue: f64,
        boundary: f64,
        distance: f64,
    },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (first asymmetry at ({row}, {col}))")]
    NotHermitian { row: usize, col: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("idempotent defect {defect} is not below {limit}")]
    DefectTooLarge { defect: f64, limit: f64 },

    #[error("matrix sign iteration did not converge after {} steps (last residual {:e})", trace.len(), trace.last().copied().unwrap_or(f64::NAN))]
    SignIterationDiverged { trace: Vec<f64> },

    #[error("trace {trace} is not within {tol:e} of an integer")]
    NonIntegralTrace { trace: f64, tol: f64 },

    #[error("unitary defect {defect:e} exceeds tolerance {tol:e}")]
    NotUnitary { defect: f64, tol: f64 },

    #[error("spectrum meets the zero window: smallest |eigenvalue| {gap:e} <= {zero_tol:e}")]
    SingularMatrix { gap: f64, zero_tol: f64 },

    #[error("signature {signature} is odd; half-signature undefined")]
    OddSignature { signature: i64 },

    #[error("eps + delta = {sum} is not below 1/400")]
    WindowViolated { sum: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("truncation radius {n_max} too small for winding {winding} (need >= {required})")]
    TruncationTooSmall {
        n_max: usize,
        winding: i64,
        required: usize,
    },

    #[error("rank decision ambiguous: singular value {below:e} below threshold but next {above:e} closer than the required gap")]
    RankDecisionAmbiguous { below: f64, above: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("pivot breakdown at row {row} (pivot magnitude {pivot:e})")]
    PivotBreakdown { row: usize, pivot: f64 },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
