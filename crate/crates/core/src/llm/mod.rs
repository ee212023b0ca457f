//! Chat-completion gateway: prompt templates, remote or mock backends,
//! retries, and lenient structured-output parsing.

mod backend;
mod config;
mod error;
mod extract;
mod gateway;
mod http;
mod mock;
mod template;

pub use backend::{BackendFailure, ChatBackend, ChatRequest, FailureKind};
pub use config::{
    LlmBackendConfig, Provider, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL, ENV_SAFE_MODE,
};
pub use error::LlmError;
pub use extract::extract_json;
pub use gateway::{Completion, LlmGateway, LlmTask, Structured};
pub use http::OpenAiBackend;
pub use mock::{MockBackend, MockFailure, MockGenerator, MockReply};
pub use template::{
    OutputShape, PromptLibrary, PromptTemplate, DESCRIBE_WORD, FILTER_SAFE, GEN_FIB, GEN_MCQ,
    JUDGE_QA, SUGGEST_CROSSLINGUAL, SUGGEST_RELATED,
};
