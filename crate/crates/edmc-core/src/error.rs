use alloc::vec::Vec;

/// Errors raised by the calibration routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("degenerate geometry: {n} points cannot span {dim} dimensions")]
    Degenerate { n: usize, dim: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("observation matrix has no known entries")]
    EmptyObservation,
    #[error("rows without any known entry: {rows:?}")]
    InsufficientObservations { rows: Vec<usize> },
    #[error("observation graph is disconnected into {} components", components.len())]
    Disconnected { components: Vec<Vec<usize>> },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
