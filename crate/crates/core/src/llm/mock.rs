//! Deterministic stand-in backend with responses scripted per template.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Deserialize;

use super::backend::{BackendFailure, ChatBackend, ChatRequest, FailureKind};
use super::LlmError;

/// One scripted reply.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Failure { error: MockFailure, #[serde(default)] message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFailure {
    Transport,
    Rejected,
    Auth,
    Timeout,
}

impl MockReply {
    pub fn text(s: impl Into<String>) -> Self {
        MockReply::Text(s.into())
    }

    pub fn fail(kind: MockFailure) -> Self {
        MockReply::Failure {
            error: kind,
            message: String::new(),
        }
    }

    fn into_result(self, template_id: &str) -> Result<String, BackendFailure> {
        match self {
            MockReply::Text(t) => Ok(t),
            MockReply::Failure { error, message } => {
                let kind = match error {
                    MockFailure::Transport => FailureKind::Transient,
                    MockFailure::Rejected => FailureKind::Rejected,
                    MockFailure::Auth => FailureKind::Auth,
                    MockFailure::Timeout => FailureKind::Timeout,
                };
                let message = if message.is_empty() {
                    format!("scripted {error:?} failure for {template_id}")
                } else {
                    message
                };
                Err(BackendFailure::new(kind, message))
            }
        }
    }
}

/// Computes a reply from the request. Must be a pure function of the
/// request for runs to stay reproducible under parallel execution.
pub type MockGenerator = Arc<dyn Fn(&ChatRequest) -> MockReply + Send + Sync>;

/// Scripted backend.
///
/// For each template, a generator (if set) answers every call; otherwise the
/// queued replies are consumed in order and the last one repeats forever.
/// Unscripted templates fail with a transport error.
#[derive(Default)]
pub struct MockBackend {
    generators: HashMap<String, MockGenerator>,
    queues: Mutex<HashMap<String, VecDeque<MockReply>>>,
    calls: Mutex<BTreeMap<String, u64>>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `{"<template_id>": ["reply", {"error": "transport"}, ...]}`.
    pub fn from_script_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("mock script {}: {e}", path.display())))?;
        let script: BTreeMap<String, Vec<MockReply>> = serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("mock script {}: {e}", path.display())))?;
        let mut mock = Self::new();
        for (template, replies) in script {
            mock = mock.script(&template, replies);
        }
        Ok(mock)
    }

    pub fn script(self, template_id: &str, replies: impl IntoIterator<Item = MockReply>) -> Self {
        self.queues
            .lock()
            .expect("mock lock")
            .entry(template_id.to_string())
            .or_default()
            .extend(replies);
        self
    }

    /// Shorthand for scripting plain-text replies.
    pub fn script_text<S: Into<String>>(
        self,
        template_id: &str,
        replies: impl IntoIterator<Item = S>,
    ) -> Self {
        self.script(template_id, replies.into_iter().map(MockReply::text))
    }

    pub fn generator(
        mut self,
        template_id: &str,
        f: impl Fn(&ChatRequest) -> MockReply + Send + Sync + 'static,
    ) -> Self {
        self.generators.insert(template_id.to_string(), Arc::new(f));
        self
    }

    pub fn call_count(&self, template_id: &str) -> u64 {
        self.calls
            .lock()
            .expect("mock lock")
            .get(template_id)
            .copied()
            .unwrap_or(0)
    }

    pub fn total_calls(&self) -> u64 {
        self.calls.lock().expect("mock lock").values().sum()
    }
}

impl ChatBackend for MockBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, BackendFailure> {
        *self
            .calls
            .lock()
            .expect("mock lock")
            .entry(request.template_id.clone())
            .or_default() += 1;

        if let Some(generate) = self.generators.get(&request.template_id) {
            return generate(request).into_result(&request.template_id);
        }
        let mut queues = self.queues.lock().expect("mock lock");
        let reply = match queues.get_mut(&request.template_id) {
            Some(queue) if queue.len() > 1 => queue.pop_front(),
            Some(queue) => queue.front().cloned(),
            None => None,
        };
        match reply {
            Some(reply) => reply.into_result(&request.template_id),
            None => Err(BackendFailure::new(
                FailureKind::Transient,
                format!("mock backend has no script for {}", request.template_id),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::OutputShape;

    fn request(template: &str) -> ChatRequest {
        ChatRequest {
            template_id: template.into(),
            prompt: String::new(),
            variables: BTreeMap::new(),
            model: "mock".into(),
            temperature: 0.0,
            expects: OutputShape::FreeText,
        }
    }

    #[test]
    fn queue_then_sticky_last() {
        let mock = MockBackend::new().script(
            "t",
            [MockReply::fail(MockFailure::Transport), MockReply::text("ok")],
        );
        assert!(mock.chat(&request("t")).is_err());
        assert_eq!(mock.chat(&request("t")).unwrap(), "ok");
        assert_eq!(mock.chat(&request("t")).unwrap(), "ok");
        assert_eq!(mock.call_count("t"), 3);
        assert!(mock.chat(&request("other")).is_err());
    }

    #[test]
    fn generator_wins() {
        let mock = MockBackend::new()
            .script_text("t", ["queued"])
            .generator("t", |r| MockReply::text(format!("gen:{}", r.template_id)));
        assert_eq!(mock.chat(&request("t")).unwrap(), "gen:t");
    }

    #[test]
    fn script_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mock.json");
        std::fs::write(
            &path,
            r#"{"describe_word": [{"error": "timeout"}, "a cat"], "x": ["y"]}"#,
        )
        .unwrap();
        let mock = MockBackend::from_script_file(&path).unwrap();
        let err = mock.chat(&request("describe_word")).unwrap_err();
        assert_eq!(err.kind, FailureKind::Timeout);
        assert_eq!(mock.chat(&request("describe_word")).unwrap(), "a cat");
        assert_eq!(mock.chat(&request("x")).unwrap(), "y");
    }
}
