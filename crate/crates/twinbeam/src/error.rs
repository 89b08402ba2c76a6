//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented range (negative efficiency,
    /// gain below one, non-finite input, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Inputs are formally valid but leave the requested quantity
    /// undefined (no light on the detector, zero idler mean, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A detector or pipeline configuration cannot be realized
    /// (sample rate below Nyquist, empty user kernel, unknown shape, ...).
    #[error("invalid configuration: {0}")]
    Configuration(String),

    /// A calibration is unusable (non-positive shot-noise excess over the
    /// electronic floor, degenerate power grid, ...).
    #[error("invalid calibration: {0}")]
    Calibration(String),

    /// A file does not follow the expected on-disk layout.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// An internal consistency check failed; indicates a bug upstream of
    /// the reporting function.
    #[error("internal consistency: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
