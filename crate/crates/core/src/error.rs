use thiserror::Error;

/// Errors raised by the library. Variants are grouped so that callers (the
/// CLI in particular) can map them onto exit classes via [`Error::class`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty region where a nonempty one is required")]
    EmptyRegion,

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("support {support} is not contained in {target}")]
    SupportNotContained { support: String, target: String },

    #[error("matrix is not square or has the wrong size: {0}")]
    BadShape(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("operator is not Hermitian (defect {defect:e}, tolerance {tolerance:e})")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("operator is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("site dimensions differ: {0} vs {1}")]
    SiteDimMismatch(usize, usize),

    #[error("overflow guard: exponent argument {value:.3} exceeds {limit}")]
    OverflowGuard { value: f64, limit: f64 },

    #[error("dimension guard: {what} has dimension {dim}, limit {limit}")]
    TooLarge { what: &'static str, dim: usize, limit: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid interaction: {0}")]
    InvalidInteraction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series does not converge: ratio {ratio:.4} >= 1")]
    NonConvergent { ratio: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("not a Pauli string: {0}")]
    NotPauliString(String),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: shapes, supports, arguments.
    Input,
    /// A numeric guard refused the computation.
    NumericGuard,
    /// A checked invariant did not hold.
    Invariant,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::OverflowGuard { .. } | Error::TooLarge { .. } | Error::NonConvergent { .. } | Error::Eigen(_) => {
                ErrorClass::NumericGuard
            }
            Error::Inconsistency(_) => ErrorClass::Invariant,
            _ => ErrorClass::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
