use thiserror::Error;

use crate::integrate::Trajectory;
use crate::scalar::Real;
use crate::sysdef::Point2;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error<T: Real> {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator produced a non-finite state.
    #[error("integration produced a non-finite state starting from {state}")]
    NonFinite {
        /// Last finite state before the failure.
        state: Point2<T>,
        /// Samples accumulated before the failure, when available.
        partial: Option<Box<Trajectory<T>>>,
    },

    /// The adaptive step shrank below the minimum step.
    #[error("step size underflow at {state} (step {step:e})")]
    StepUnderflow { state: Point2<T>, step: T },

    /// A portrait seed could not be integrated.
    #[error("integration from seed {seed} failed: {reason}")]
    Seed { seed: Point2<T>, reason: String },

    /// A searched-for feature (crossing, bracket) does not exist.
    #[error("not found: {0}")]
    NotFound(String),
}

pub type Result<T, S> = std::result::Result<T, Error<S>>;

pub(crate) fn domain<T: Real>(msg: impl Into<String>) -> Error<T> {
    Error::Domain(msg.into())
}
