use thiserror::Error;

use crate::optimize::LadderStep;
use crate::sweep::SweepTable;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// `n0 == n1`: the two spin projections cannot be told apart.
    #[error("degenerate estimator: spin states produce identical expected counts")]
    DegenerateEstimator,

    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    /// The excitation-rate ladder ran out before successive maxima settled.
    #[error("excitation-rate ladder exhausted after {} steps without reaching rel_tol", ladder.len())]
    NotConverged { ladder: Vec<LadderStep<f64>> },

    #[error("{failed} of {total} sweep cells failed")]
    SweepFailed {
        failed: usize,
        total: usize,
        table: Box<SweepTable>,
    },

    #[error("unknown figure id `{0}` (expected one of 2a, 2b, 3a, 3b, 4a, 4b, 5a, 5b)")]
    UnknownFigure(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::InvalidArgument { .. }
                | Error::UnknownFigure(_)
        )
    }
}
