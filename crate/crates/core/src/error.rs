use thiserror::Error;

/// Errors surfaced by the numerics modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or subsystem dimension lists do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix required to be Hermitian is not, beyond tolerance.
    #[error("matrix is not Hermitian: relative residual {residual:.3e}")]
    NonHermitian { residual: f64 },

    /// A structural contract (isometry, Kraus completeness, state) is violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A scalar parameter is outside its admissible range.
    #[error("parameter out of range: {0}")]
    Parameter(String),

    /// Construction parameters fall outside the regime the formula covers.
    #[error("regime violation: {0}")]
    Regime(String),

    /// Weingarten values are only tabulated for first and second moments.
    #[error("unsupported moment order n = {0}; only n <= 2 is available")]
    UnsupportedOrder(usize),

    /// Wg((12), d) has a pole at d = 1 (d^2 - 1 = 0).
    #[error("Weingarten pole: Wg on S_2 is undefined at d = 1")]
    WeingartenPole,

    /// The simulated global state would exceed the dense-storage budget.
    #[error("dimension overflow: total dimension {dim} exceeds limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A report or matrix file could not be decoded.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
