use core::fmt;

/// Errors from environment construction, lattice recursions, and exact laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Error {
    /// An argument lies outside the documented domain.
    InvalidParameter {
        /// Which requirement was violated.
        what: &'static str,
    },
    /// The operation needs boundary weights but the environment is bulk-only.
    MissingBoundary,
    /// Index or shape disagreement between an environment, a lattice, or a path.
    DimensionMismatch {
        /// Which shapes disagreed.
        what: &'static str,
    },
    /// An exact identity or normalization drifted past its tolerance.
    NumericalFailure {
        /// Which identity failed.
        what: &'static str,
        /// Observed residual.
        residual: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            Error::MissingBoundary => {
                write!(f, "operation requires an environment with boundary weights")
            }
            Error::DimensionMismatch { what } => write!(f, "dimension mismatch: {what}"),
            Error::NumericalFailure { what, residual } => {
                write!(f, "numerical failure in {what}: residual {residual:e}")
            }
        }
    }
}

impl core::error::Error for Error {}
