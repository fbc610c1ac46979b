//! Crate-wide error type and result alias.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted anywhere in the crate.
#[derive(Debug)]
pub enum Error {
    /// Matrix or vector shapes do not line up.
    Dimension(String),
    /// Invalid configuration (bad counts, unknown keys, malformed file).
    Config(String),
    /// A discrete action index is out of range for its agent.
    Action {
        agent: usize,
        action: usize,
        limit: usize,
    },
    /// A caller violated an operation's contract (missing inputs, wrong mode).
    Contract(String),
    /// A numeric evaluation produced a non-finite value.
    NonFinite(String),
    /// Checkpoint file is malformed or incompatible.
    Checkpoint(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Action {
                agent,
                action,
                limit,
            } => write!(
                f,
                "action error: agent {agent} got action {action}, action set size is {limit}"
            ),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl Error {
    /// Process exit code for the CLI: config problems are 2, runtime problems 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
