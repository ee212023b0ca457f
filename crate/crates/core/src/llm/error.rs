use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("template error: {0}")]
    Template(String),
    #[error("no parseable {expected} in {attempts} attempt(s)")]
    MalformedOutput {
        expected: &'static str,
        attempts: u32,
        last_raw: String,
    },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::Transport(_) => "TransportError",
            LlmError::Auth(_) => "AuthError",
            LlmError::Timeout(_) => "TimeoutError",
            LlmError::Template(_) => "TemplateError",
            LlmError::MalformedOutput { .. } => "MalformedOutput",
            LlmError::InvalidTask(_) => "InvalidTask",
            LlmError::Config(_) => "ConfigError",
        }
    }
}
