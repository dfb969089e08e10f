use std::io;
use std::path::PathBuf;

use convo_gate_core::teacher::TeacherError;

#[derive(Debug, thiserror::Error)]
pub enum GateError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}:{line}: {reason}", path.display())]
    Line { path: PathBuf, line: usize, reason: String },

    #[error("writing {} failed after {written} records: {source}", path.display())]
    PartialWrite { path: PathBuf, written: usize, source: io::Error },

    #[error("{}: {reason}", path.display())]
    Config { path: PathBuf, reason: String },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("model {}: {reason}", path.display())]
    Model { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] convo_gate_core::Error),

    #[error(transparent)]
    Teacher(#[from] TeacherError),
}

impl GateError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

pub type Result<T, E = GateError> = std::result::Result<T, E>;
