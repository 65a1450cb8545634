//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration or input text could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Geometry parameters violate a construction invariant.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// An operation needs spectral dispersion but `s * alpha == 0`.
    #[error("degenerate spectral geometry: s * alpha is zero, no band structure")]
    DegenerateSpectral,

    /// An operation was called on a geometry outside its regime.
    #[error("wrong regime: {0}")]
    WrongRegime(String),

    /// Array or operator shapes do not line up.
    #[error("dimension mismatch: expected {expected} elements, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A coded-aperture set violates its invariants.
    #[error("invalid codes: {0}")]
    InvalidCodes(String),

    /// Numeric failure inside an iterative routine (non-finite values).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A binary or text artifact does not follow its documented format.
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::InvalidGeometry(msg.into())
    }
}
