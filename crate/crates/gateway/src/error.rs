use thiserror::Error;

use eci_core::PromptError;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("no cached response for key {key} (replay mode never calls the network)")]
    CacheMiss { key: String },
    #[error("backend answered with status {status}: {message}")]
    Backend { status: u16, message: String },
    #[error("no scripted response for task `{task}` on ({event1}, {event2})")]
    ScriptMiss {
        task: String,
        event1: String,
        event2: String,
    },
    #[error("invalid backend: {0}")]
    Spec(String),
    #[error("cache error at {path}: {message}")]
    Cache { path: String, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl GatewayError {
    /// Failures of the connection itself, as opposed to answers the backend
    /// gave or lookups that cannot succeed.
    pub fn is_transport(&self) -> bool {
        matches!(self, GatewayError::Transport { .. })
    }
}
