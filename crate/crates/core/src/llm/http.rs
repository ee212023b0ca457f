//! OpenAI-compatible chat-completions over HTTP.

use serde_json::{json, Value};

use super::backend::{BackendFailure, ChatBackend, ChatRequest, FailureKind};
use super::LlmBackendConfig;

pub struct OpenAiBackend {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl OpenAiBackend {
    pub fn new(config: &LlmBackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key: config.api_key(),
        }
    }
}

fn classify(err: ureq::Error) -> BackendFailure {
    match err {
        ureq::Error::Timeout(t) => BackendFailure::new(FailureKind::Timeout, format!("timeout ({t})")),
        other => BackendFailure::new(FailureKind::Transient, other.to_string()),
    }
}

impl ChatBackend for OpenAiBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, BackendFailure> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        });
        let mut builder = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = builder.send(body.to_string()).map_err(classify)?;

        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(classify)?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendFailure::new(FailureKind::Auth, format!("HTTP {status}: {text}"))),
            408 => return Err(BackendFailure::new(FailureKind::Timeout, format!("HTTP {status}"))),
            429 | 500..=599 => {
                return Err(BackendFailure::new(FailureKind::Transient, format!("HTTP {status}: {text}")))
            }
            _ => return Err(BackendFailure::new(FailureKind::Rejected, format!("HTTP {status}: {text}"))),
        }

        let parsed: Value = serde_json::from_str(&text).map_err(|e| {
            BackendFailure::new(FailureKind::Transient, format!("response is not JSON: {e}"))
        })?;
        parsed
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                BackendFailure::new(
                    FailureKind::Transient,
                    "response has no choices[0].message.content",
                )
            })
    }
}
