use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::LlmError;

pub const ENV_BASE_URL: &str = "DIYMKG_LLM_BASE_URL";
pub const ENV_MODEL: &str = "DIYMKG_LLM_MODEL";
pub const ENV_API_KEY: &str = "DIYMKG_LLM_API_KEY";
pub const ENV_SAFE_MODE: &str = "DIYMKG_SAFE_MODE";

const DEFAULT_BASE_URL: &str = "http://localhost:8000/v1";
const DEFAULT_MODEL: &str = "Llama-3.3-70B-Instruct";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// OpenAI-compatible `/chat/completions` endpoint, hosted or local.
    OpenAiCompatible,
    /// Scripted in-process responses.
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmBackendConfig {
    pub provider: Provider,
    pub base_url: String,
    pub model_name: String,
    /// Environment variable holding the API key; unset for local servers.
    pub api_key_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles on every retry.
    pub retry_backoff_ms: u64,
    /// Script file for the mock provider.
    pub mock_script: Option<PathBuf>,
}

impl Default for LlmBackendConfig {
    fn default() -> Self {
        Self {
            provider: Provider::OpenAiCompatible,
            base_url: DEFAULT_BASE_URL.into(),
            model_name: DEFAULT_MODEL.into(),
            api_key_env: Some(ENV_API_KEY.into()),
            timeout_secs: 60.0,
            max_retries: 3,
            retry_backoff_ms: 500,
            mock_script: None,
        }
    }
}

impl LlmBackendConfig {
    /// Mock configuration with no backoff delay.
    pub fn mock() -> Self {
        Self {
            provider: Provider::Mock,
            base_url: "mock://local".into(),
            model_name: "mock".into(),
            api_key_env: None,
            retry_backoff_ms: 0,
            ..Self::default()
        }
    }

    /// Defaults overridden by `DIYMKG_LLM_BASE_URL` / `DIYMKG_LLM_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        let mut config = Self::default();
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            config.base_url = url;
        }
        if let Ok(model) = std::env::var(ENV_MODEL) {
            config.model_name = model;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(LlmError::Config(format!(
                "timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(LlmError::Config("model name is empty".into()));
        }
        if self.provider == Provider::OpenAiCompatible {
            let url = url::Url::parse(&self.base_url)
                .map_err(|e| LlmError::Config(format!("base_url {:?}: {e}", self.base_url)))?;
            if !matches!(url.scheme(), "http" | "https") {
                return Err(LlmError::Config(format!(
                    "base_url must be http(s), got {:?}",
                    self.base_url
                )));
            }
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Delay before retry number `retry` (0-based), capped at 30 s.
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << retry.min(16);
        Duration::from_millis(self.retry_backoff_ms.saturating_mul(factor).min(30_000))
    }

    pub fn api_key(&self) -> Option<String> {
        self.api_key_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|k| !k.trim().is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(LlmBackendConfig::default().validate().is_ok());
        assert!(LlmBackendConfig::mock().validate().is_ok());
        let bad_url = LlmBackendConfig {
            base_url: "not a url".into(),
            ..Default::default()
        };
        assert!(bad_url.validate().is_err());
        let ftp = LlmBackendConfig {
            base_url: "ftp://example.com".into(),
            ..Default::default()
        };
        assert!(ftp.validate().is_err());
        let zero = LlmBackendConfig {
            timeout_secs: 0.0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn backoff_doubles() {
        let c = LlmBackendConfig {
            retry_backoff_ms: 100,
            ..Default::default()
        };
        assert_eq!(c.backoff(0), Duration::from_millis(100));
        assert_eq!(c.backoff(3), Duration::from_millis(800));
        assert_eq!(c.backoff(40), Duration::from_millis(30_000));
    }
}
