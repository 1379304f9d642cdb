use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("power iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("spectral norm cross-check failed: power iteration {power}, dense eigensolve {dense}")]
    SpectralMismatch { power: f64, dense: f64 },

    #[error("log of result ({log_value}) exceeds the representable range")]
    Overflow { log_value: f64 },

    #[error("{supports} supports exceed the enumeration cap {cap}; use rip_sampled instead")]
    EnumerationCap { supports: u128, cap: u128 },

    #[error("matrix family must be nonempty with uniform dimensions: {0}")]
    InvalidFamily(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidAlpha(_) => "invalid_alpha",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::NoConvergence { .. } => "no_convergence",
            Error::SpectralMismatch { .. } => "spectral_mismatch",
            Error::Overflow { .. } => "overflow",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::InvalidFamily(_) => "invalid_family",
            Error::Config(_) => "config",
            Error::MissingColumn { .. } => "missing_column",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
