use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology config: {0}")]
    Topology(String),

    #[error("sync action has {got} controllers, sync rate is {expected}")]
    SyncCardinality { expected: usize, got: usize },

    #[error("controller index {index} out of range for {n} controllers")]
    ControllerIndex { index: usize, n: usize },

    #[error("action index {index} out of range, action space has {size} actions")]
    ActionIndex { index: usize, size: usize },

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed config line {line}: {text}")]
    ConfigSyntax { line: usize, text: String },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed topology text at line {line}: {reason}")]
    TopologyText { line: usize, reason: String },

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration rather than
    /// failures while running.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::ConfigSyntax { .. } | Error::Topology(_)
        )
    }
}
