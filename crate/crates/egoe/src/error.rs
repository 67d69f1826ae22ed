use thiserror::Error;

/// Errors produced by the egoe library.
#[derive(Debug, Error)]
pub enum EgoeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigensolver failed to converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("degenerate spectrum: spectral width is zero")]
    DegenerateSpectrum,

    #[error("total variance is zero: sigma_0^2 is undefined")]
    ZeroVariance,

    #[error("Hermite polynomial He_{0} not supported (only n = 3, 4, 6)")]
    UnsupportedHermiteOrder(u32),

    #[error("member {member} failed: {reason}")]
    MemberFailure { member: u32, reason: String },
}

pub type Result<T> = std::result::Result<T, EgoeError>;
