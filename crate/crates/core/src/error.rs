use thiserror::Error;

/// Errors raised by path generation, tree fitting and the backward solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FbsdeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure at time step {step}: {detail}")]
    NumericalFailure { step: usize, detail: String },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
}

impl FbsdeError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FbsdeError::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = FbsdeError> = std::result::Result<T, E>;
