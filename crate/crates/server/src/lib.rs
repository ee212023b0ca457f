//! JSON HTTP API over a DIY-MKG data directory.
//!
//! Every graph mutation is written through to `graph.json` before its
//! response is sent. Model-bound endpoints (expansion and quiz generation)
//! run on the blocking pool without holding the graph lock, so they overlap
//! freely with reads and with each other.

pub mod error;
mod extract;
mod routes;

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use diymkg_core::expansion::{CandidateWord, Vocabulary};
use diymkg_core::graph::{GraphError, LanguageCode, NodeId, Workspace, WordNode};
use diymkg_core::llm::{LlmBackendConfig, LlmError, LlmGateway, PromptLibrary};
use diymkg_core::quiz::QuizSession;
use parking_lot::{Mutex, RwLock};

pub use error::{ApiError, ERROR_CODES};
pub use routes::router;

/// How many suggestion batches are remembered for commit validation.
const BATCH_MEMORY: usize = 64;

/// Candidates returned by one `/api/expand` call.
#[derive(Debug, Clone)]
pub struct SuggestionBatch {
    pub chosen_node: NodeId,
    pub candidates: Vec<CandidateWord>,
}

#[derive(Default)]
struct Batches {
    order: VecDeque<String>,
    by_id: HashMap<String, SuggestionBatch>,
}

/// Shared state behind every handler.
pub struct AppState {
    workspace: RwLock<Workspace>,
    gateway: LlmGateway,
    quizzes: Mutex<HashMap<String, QuizSession>>,
    batches: Mutex<Batches>,
    safe_mode: bool,
}

impl AppState {
    pub fn new(workspace: Workspace, gateway: LlmGateway, safe_mode: bool) -> Arc<Self> {
        Arc::new(Self {
            workspace: RwLock::new(workspace),
            gateway,
            quizzes: Mutex::new(HashMap::new()),
            batches: Mutex::new(Batches::default()),
            safe_mode,
        })
    }

    pub fn workspace(&self) -> &RwLock<Workspace> {
        &self.workspace
    }

    pub fn gateway(&self) -> &LlmGateway {
        &self.gateway
    }

    pub fn safe_mode(&self) -> bool {
        self.safe_mode
    }

    fn remember_batch(&self, batch: SuggestionBatch) -> String {
        let id = uuid::Uuid::now_v7().to_string();
        let mut batches = self.batches.lock();
        batches.order.push_back(id.clone());
        batches.by_id.insert(id.clone(), batch);
        while batches.order.len() > BATCH_MEMORY {
            if let Some(old) = batches.order.pop_front() {
                batches.by_id.remove(&old);
            }
        }
        id
    }

    fn batch(&self, id: &str) -> Option<SuggestionBatch> {
        self.batches.lock().by_id.get(id).cloned()
    }
}

/// Read access that takes the graph lock only for each lookup.
struct LockedVocabulary<'a>(&'a RwLock<Workspace>);

impl Vocabulary for LockedVocabulary<'_> {
    fn node(&self, id: &NodeId) -> Option<WordNode> {
        self.0.read().store().node(id).cloned()
    }

    fn find(&self, word: &str, language: &LanguageCode) -> Option<NodeId> {
        self.0.read().store().find_node(word, language)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("cannot prepare prompts directory {path}: {source}")]
    Prompts {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub safe_mode: bool,
    /// Template overrides; defaults to `<data_dir>/prompts`.
    pub prompts_dir: Option<PathBuf>,
    pub llm: LlmBackendConfig,
}

impl ServerConfig {
    pub fn prompts_dir(&self) -> PathBuf {
        self.prompts_dir
            .clone()
            .unwrap_or_else(|| self.data_dir.join(diymkg_core::graph::PROMPTS_DIR))
    }
}

/// Opens the data directory and builds the gateway. Built-in templates are
/// written to the prompts directory if missing, so they can be edited.
pub fn build_state(config: &ServerConfig) -> Result<Arc<AppState>, StartError> {
    let workspace = Workspace::open(&config.data_dir)?;
    let prompts_dir = config.prompts_dir();
    PromptLibrary::builtin()
        .write_missing(&prompts_dir)
        .map_err(|source| StartError::Prompts {
            path: prompts_dir.clone(),
            source,
        })?;
    let prompts = PromptLibrary::builtin_with_overrides(&prompts_dir)?;
    let gateway = LlmGateway::from_config(config.llm.clone(), prompts)?;
    Ok(AppState::new(workspace, gateway, config.safe_mode))
}

/// Serves until the listener fails or the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
