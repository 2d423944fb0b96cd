use std::path::PathBuf;

use rhirl_core::rhirl::RhirlError;
use thiserror::Error;

/// Process exit codes shared by every command.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID_INPUT: i32 = 2;
    pub const RUNTIME: i32 = 3;
}

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: invalid story: {source}")]
    Story {
        path: PathBuf,
        source: rhirl_core::story::ValidationError,
    },
    #[error(transparent)]
    Trace(#[from] rhirl_core::trace::TraceError),
    #[error(transparent)]
    Reward(#[from] rhirl_core::reward::RewardError),
    #[error(transparent)]
    Evaluation(#[from] rhirl_core::evaluation::EvaluationError),
    #[error(transparent)]
    Learner(#[from] RhirlError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl WorkbenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WorkbenchError::Io { path: path.into(), source }
    }

    /// Bad input exits with 2, failures while doing the work with 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => exit::INVALID_INPUT,
            WorkbenchError::Learner(
                RhirlError::InvalidConfig(_) | RhirlError::EmptyDemonstrations | RhirlError::DemonstrationMismatch { .. },
            ) => exit::INVALID_INPUT,
            WorkbenchError::Io { .. } | WorkbenchError::Learner(_) | WorkbenchError::Runtime(_) => exit::RUNTIME,
            WorkbenchError::Syntax { .. }
            | WorkbenchError::Story { .. }
            | WorkbenchError::Trace(_)
            | WorkbenchError::Reward(_)
            | WorkbenchError::Evaluation(_)
            | WorkbenchError::Invalid(_) => exit::INVALID_INPUT,
        }
    }
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;
