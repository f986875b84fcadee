use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported spatial dimension {0} (expected 1, 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: {what} has {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{name} is not Hermitian (max |M - M^H| = {deviation:.3e})")]
    NotHermitian { name: String, deviation: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid time division: {0}")]
    InvalidDivision(String),

    #[error("potential does not provide {0}")]
    MissingDerivative(&'static str),

    #[error("derivative self-check failed for {evaluator}: relative error {error:.3e} exceeds {tolerance:.1e}")]
    DerivativeCheck {
        evaluator: &'static str,
        error: f64,
        tolerance: f64,
    },

    #[error("sigma(division) = {sigma:.6} exceeds 1; the norm bound only applies for sigma <= 1")]
    SigmaTooLarge { sigma: f64 },

    #[error("grid too large for dense assembly: {0}")]
    GridTooLarge(String),

    #[error("propagation cone wraps the periodic domain: half-width {half_width} < required {required:.6}")]
    ConeWraps { half_width: f64, required: f64 },

    #[error("{0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
