use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("message causality cycle: {0}")]
    Causality(String),

    #[error("event {process}:{seq} has no Lamport timestamp")]
    Unstamped { process: u32, seq: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid analysis configuration {bits}: {reason}")]
    InvalidConfiguration { bits: String, reason: &'static str },

    #[error("no static graph for context={ctx} flow={flow}")]
    MissingGraph { ctx: bool, flow: bool },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("statistics: {0}")]
    Stats(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
