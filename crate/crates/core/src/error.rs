use thiserror::Error;

use crate::kernel::{EventId, EventState};
use crate::process::ProcessId;

/// Errors raised by the simulation kernel, resources and scenarios.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("event {event} is {state:?}, expected {expected}")]
    Lifecycle {
        event: EventId,
        state: EventState,
        expected: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A failed event reached the kernel with nobody waiting for it.
    #[error("unhandled failure in {origin}: {cause}")]
    UnhandledFailure { origin: String, cause: String },

    #[error("event {0} belongs to a different environment")]
    ForeignEvent(EventId),

    #[error("process {0} has terminated")]
    DeadProcess(ProcessId),

    #[error("a process cannot interrupt itself")]
    SelfInterrupt,

    #[error("resource usage error: {0}")]
    Usage(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidArgument(msg.into())
}
