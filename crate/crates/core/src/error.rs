use thiserror::Error;

use crate::planner::PlanningContext;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs that do not belong together: sets from different universes,
    /// unknown atoms, unknown action or policy ids.
    #[error("domain error: {0}")]
    Domain(String),

    /// An action model was applied in a state that does not satisfy it.
    #[error("precondition not satisfied: {0}")]
    Precondition(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The planner hit its expansion cap; the partial context is kept for
    /// diagnostics.
    #[error("planner expansion limit of {limit} reached on task `{}`", context.task_id)]
    ExpansionLimit {
        limit: usize,
        context: Box<PlanningContext>,
    },

    #[error("unsatisfiable scenario: {0}")]
    UnsatisfiableScenario(String),

    #[error("{}{line}:{column}: {message}", .file.as_ref().map(|f| format!("{f}:")).unwrap_or_default())]
    Parse {
        /// Set once the error is known to come from a file.
        file: Option<String>,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("proposer protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: None,
            line,
            column,
            message: message.into(),
        }
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_) | Error::ExpansionLimit { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
