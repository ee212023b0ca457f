use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;
use tracing::{debug, warn};

use super::backend::{ChatBackend, ChatRequest};
use super::extract::extract_json;
use super::http::OpenAiBackend;
use super::mock::MockBackend;
use super::{LlmBackendConfig, LlmError, OutputShape, PromptLibrary, Provider};

/// A backend-agnostic completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmTask {
    pub template_id: String,
    pub variables: BTreeMap<String, String>,
    pub temperature: f32,
    /// Overrides the template's declared shape when set.
    pub expects: Option<OutputShape>,
}

impl LlmTask {
    pub fn new(template_id: &str) -> Self {
        Self {
            template_id: template_id.to_string(),
            variables: BTreeMap::new(),
            temperature: 0.0,
            expects: None,
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn temperature(mut self, t: f32) -> Self {
        self.temperature = t;
        self
    }

    pub fn expects(mut self, shape: OutputShape) -> Self {
        self.expects = Some(shape);
        self
    }
}

/// Raw completion with the number of transport retries it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub retries: u32,
}

/// Parsed structured output.
#[derive(Debug, Clone, PartialEq)]
pub struct Structured {
    pub value: Value,
    pub raw: String,
    /// Completions requested, including ones that did not parse.
    pub attempts: u32,
}

/// Renders templates, calls the backend, retries and parses.
#[derive(Clone)]
pub struct LlmGateway {
    config: LlmBackendConfig,
    prompts: Arc<PromptLibrary>,
    backend: Arc<dyn ChatBackend>,
}

impl std::fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmGateway")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl LlmGateway {
    /// Builds the backend named by `config.provider`.
    pub fn from_config(config: LlmBackendConfig, prompts: PromptLibrary) -> Result<Self, LlmError> {
        config.validate()?;
        let backend: Arc<dyn ChatBackend> = match config.provider {
            Provider::OpenAiCompatible => Arc::new(OpenAiBackend::new(&config)),
            Provider::Mock => match &config.mock_script {
                Some(path) => Arc::new(MockBackend::from_script_file(path)?),
                None => Arc::new(MockBackend::new()),
            },
        };
        Ok(Self::with_backend(config, prompts, backend))
    }

    pub fn with_backend(
        config: LlmBackendConfig,
        prompts: PromptLibrary,
        backend: Arc<dyn ChatBackend>,
    ) -> Self {
        Self {
            config,
            prompts: Arc::new(prompts),
            backend,
        }
    }

    pub fn config(&self) -> &LlmBackendConfig {
        &self.config
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    pub fn model_name(&self) -> &str {
        &self.config.model_name
    }

    pub fn render_template(
        &self,
        template_id: &str,
        variables: &BTreeMap<String, String>,
    ) -> Result<String, LlmError> {
        self.prompts.render(template_id, variables)
    }

    fn prepare(&self, task: &LlmTask) -> Result<ChatRequest, LlmError> {
        if !(0.0..=2.0).contains(&task.temperature) {
            return Err(LlmError::InvalidTask(format!(
                "temperature {} outside [0, 2]",
                task.temperature
            )));
        }
        let template = self
            .prompts
            .get(&task.template_id)
            .ok_or_else(|| LlmError::Template(format!("unknown template {:?}", task.template_id)))?;
        Ok(ChatRequest {
            template_id: task.template_id.clone(),
            prompt: template.render(&task.variables)?,
            variables: task.variables.clone(),
            model: self.config.model_name.clone(),
            temperature: task.temperature,
            expects: task.expects.unwrap_or(template.expects),
        })
    }

    fn send(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let mut retries = 0;
        loop {
            match self.backend.chat(request) {
                Ok(text) => return Ok(Completion { text, retries }),
                Err(failure) if failure.is_retryable() && retries < self.config.max_retries => {
                    let delay = self.config.backoff(retries);
                    retries += 1;
                    warn!(
                        template = %request.template_id,
                        retry = retries,
                        max_retries = self.config.max_retries,
                        delay_ms = delay.as_millis() as u64,
                        error = %failure.message,
                        "llm call failed, retrying"
                    );
                    if !delay.is_zero() {
                        std::thread::sleep(delay);
                    }
                }
                Err(failure) => return Err(failure.into()),
            }
        }
    }

    /// Sends the task, retrying transport failures with exponential
    /// backoff. Template errors surface before any backend call.
    pub fn complete_detailed(&self, task: &LlmTask) -> Result<Completion, LlmError> {
        let request = self.prepare(task)?;
        self.send(&request)
    }

    pub fn complete(&self, task: &LlmTask) -> Result<String, LlmError> {
        self.complete_detailed(task).map(|c| c.text)
    }

    /// Like [`complete`](Self::complete), then extracts and shape-checks a
    /// JSON value, asking again on unparseable output.
    pub fn complete_structured(&self, task: &LlmTask) -> Result<Structured, LlmError> {
        let request = self.prepare(task)?;
        let shape = request.expects;
        if shape == OutputShape::FreeText {
            return Err(LlmError::InvalidTask(format!(
                "{} expects free text, not JSON",
                task.template_id
            )));
        }
        let budget = self.config.max_retries + 1;
        let mut last_raw = String::new();
        for attempt in 1..=budget {
            let completion = self.send(&request)?;
            if let Some(value) = extract_json(&completion.text, shape) {
                debug!(template = %request.template_id, attempt, "structured output parsed");
                return Ok(Structured {
                    value,
                    raw: completion.text,
                    attempts: attempt,
                });
            }
            warn!(
                template = %request.template_id,
                attempt,
                budget,
                "no {} in llm output",
                shape.as_str()
            );
            last_raw = completion.text;
        }
        Err(LlmError::MalformedOutput {
            expected: shape.as_str(),
            attempts: budget,
            last_raw,
        })
    }
}
