use std::collections::BTreeMap;

use super::{LlmError, OutputShape};

/// One fully rendered chat-completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub template_id: String,
    /// Rendered prompt, sent as the single user message.
    pub prompt: String,
    /// The variables the prompt was rendered from. Remote backends ignore
    /// them; the mock uses them to script responses.
    pub variables: BTreeMap<String, String>,
    pub model: String,
    pub temperature: f32,
    pub expects: OutputShape,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureKind {
    /// Connection problems, 5xx and 429: worth retrying.
    Transient,
    /// Request was understood and refused (4xx other than auth / 429).
    Rejected,
    Auth,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendFailure {
    pub kind: FailureKind,
    pub message: String,
}

impl BackendFailure {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self.kind, FailureKind::Transient | FailureKind::Timeout)
    }
}

impl From<BackendFailure> for LlmError {
    fn from(f: BackendFailure) -> Self {
        match f.kind {
            FailureKind::Transient | FailureKind::Rejected => LlmError::Transport(f.message),
            FailureKind::Auth => LlmError::Auth(f.message),
            FailureKind::Timeout => LlmError::Timeout(f.message),
        }
    }
}

/// A chat-completion transport.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, BackendFailure>;
}
