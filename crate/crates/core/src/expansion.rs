//! Vocabulary expansion: ask the model for related words, optionally filter
//! them in safe mode, and commit only what the learner selected.
//!
//! Nothing in this module writes model output into the graph except
//! [`commit_selection`], which takes the learner's explicit selection.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{EdgeId, EdgeSpec, GraphError, GraphStore, LanguageCode, NodeId, WordNode};
use crate::llm::{LlmError, LlmGateway, LlmTask, FILTER_SAFE, SUGGEST_RELATED};
use crate::text::normalize_word;

pub const DEFAULT_MAX_CANDIDATES: usize = 10;
const DEFAULT_RELATION: &str = "related";

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("safe-mode filter failed, batch rejected: {0}")]
    BatchRejected(String),
    #[error("invalid expansion request: {0}")]
    InvalidRequest(String),
}

impl ExpansionError {
    pub fn code(&self) -> &'static str {
        match self {
            ExpansionError::Graph(e) => e.code(),
            ExpansionError::Llm(e) => e.code(),
            ExpansionError::BatchRejected(_) => "BatchRejected",
            ExpansionError::InvalidRequest(_) => "InvalidRequest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateWord {
    pub word: String,
    pub language: LanguageCode,
    pub relation: String,
    pub gloss: String,
    #[serde(default)]
    pub already_known: bool,
}

impl CandidateWord {
    fn key(&self) -> (String, LanguageCode) {
        (normalize_word(&self.word), self.language.clone())
    }
}

fn default_template() -> String {
    SUGGEST_RELATED.to_string()
}

fn default_max() -> usize {
    DEFAULT_MAX_CANDIDATES
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionRequest {
    pub chosen_node: NodeId,
    #[serde(default = "default_template")]
    pub template_id: String,
    pub target_languages: BTreeSet<LanguageCode>,
    #[serde(default = "default_max")]
    pub max_candidates: usize,
    #[serde(default)]
    pub safe_mode: bool,
}

impl ExpansionRequest {
    /// Same-language request with default settings.
    pub fn monolingual(chosen: &WordNode) -> Self {
        Self {
            chosen_node: chosen.id.clone(),
            template_id: default_template(),
            target_languages: [chosen.language.clone()].into(),
            max_candidates: DEFAULT_MAX_CANDIDATES,
            safe_mode: false,
        }
    }

    fn validate(&self) -> Result<(), ExpansionError> {
        if self.max_candidates == 0 {
            return Err(ExpansionError::InvalidRequest("max_candidates must be ≥ 1".into()));
        }
        if self.target_languages.is_empty() {
            return Err(ExpansionError::InvalidRequest("target_languages is empty".into()));
        }
        Ok(())
    }
}

/// Read access to the vocabulary, so callers can hand in a locked store
/// without holding the lock across model calls.
pub trait Vocabulary {
    fn node(&self, id: &NodeId) -> Option<WordNode>;
    fn find(&self, word: &str, language: &LanguageCode) -> Option<NodeId>;
}

impl Vocabulary for GraphStore {
    fn node(&self, id: &NodeId) -> Option<WordNode> {
        GraphStore::node(self, id).cloned()
    }

    fn find(&self, word: &str, language: &LanguageCode) -> Option<NodeId> {
        self.find_node(word, language)
    }
}

fn parse_candidate(item: &Value, fallback_language: Option<&LanguageCode>) -> Option<CandidateWord> {
    let (word, language, relation, gloss) = match item {
        Value::String(word) => (word.as_str(), None, None, None),
        Value::Object(map) => (
            map.get("word")?.as_str()?,
            map.get("language").and_then(Value::as_str),
            map.get("relation").and_then(Value::as_str),
            map.get("gloss").and_then(Value::as_str),
        ),
        _ => return None,
    };
    if normalize_word(word).is_empty() {
        return None;
    }
    let language = match language {
        Some(code) => LanguageCode::new(code).ok()?,
        None => fallback_language?.clone(),
    };
    let relation = relation.map(str::trim).filter(|r| !r.is_empty()).unwrap_or(DEFAULT_RELATION);
    Some(CandidateWord {
        word: word.trim().to_string(),
        language,
        relation: relation.to_string(),
        gloss: gloss.unwrap_or("").trim().to_string(),
        already_known: false,
    })
}

/// Asks the model for words related to the chosen node.
///
/// Off-language candidates, repeats of the chosen word, and duplicates
/// within the batch are dropped; at most `max_candidates` remain, each
/// flagged with whether it is already in the vocabulary.
pub fn suggest_related(
    gateway: &LlmGateway,
    vocab: &impl Vocabulary,
    req: &ExpansionRequest,
) -> Result<Vec<CandidateWord>, ExpansionError> {
    req.validate()?;
    let chosen = vocab
        .node(&req.chosen_node)
        .ok_or_else(|| GraphError::NotFound(req.chosen_node.to_string()))?;
    let targets = req
        .target_languages
        .iter()
        .map(LanguageCode::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    let task = LlmTask::new(&req.template_id)
        .var("word", chosen.word.clone())
        .var("language", chosen.language.as_str())
        .var("target_languages", targets)
        .var("max_candidates", req.max_candidates.to_string());
    let structured = gateway.complete_structured(&task)?;

    let fallback = if req.target_languages.len() == 1 {
        req.target_languages.iter().next()
    } else {
        None
    };
    let chosen_key = (normalize_word(&chosen.word), chosen.language.clone());
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in structured.value.as_array().into_iter().flatten() {
        let Some(mut candidate) = parse_candidate(item, fallback) else {
            continue;
        };
        if !req.target_languages.contains(&candidate.language) {
            continue;
        }
        let key = candidate.key();
        if key == chosen_key || !seen.insert(key) {
            continue;
        }
        candidate.already_known = vocab.find(&candidate.word, &candidate.language).is_some();
        out.push(candidate);
        if out.len() == req.max_candidates {
            break;
        }
    }
    Ok(out)
}

/// One extra model call that keeps only appropriate candidates. Output is
/// an order-preserving subset of the input; if the filter's answer cannot be
/// parsed the whole batch is rejected.
pub fn filter_inappropriate(
    gateway: &LlmGateway,
    candidates: Vec<CandidateWord>,
) -> Result<Vec<CandidateWord>, ExpansionError> {
    if candidates.is_empty() {
        return Ok(candidates);
    }
    let listing: Vec<Value> = candidates
        .iter()
        .map(|c| json!({"word": c.word, "language": c.language}))
        .collect();
    let task = LlmTask::new(FILTER_SAFE).var("candidates", Value::Array(listing).to_string());
    let structured = match gateway.complete_structured(&task) {
        Ok(s) => s,
        Err(LlmError::MalformedOutput { last_raw, .. }) => {
            return Err(ExpansionError::BatchRejected(format!(
                "unparseable filter output: {last_raw:?}"
            )))
        }
        Err(other) => return Err(other.into()),
    };

    let mut allowed_any_language = HashSet::new();
    let mut allowed_exact = HashSet::new();
    for item in structured.value.as_array().into_iter().flatten() {
        match item {
            Value::String(word) => {
                allowed_any_language.insert(normalize_word(word));
            }
            Value::Object(map) => {
                let Some(word) = map.get("word").and_then(Value::as_str) else {
                    continue;
                };
                match map
                    .get("language")
                    .and_then(Value::as_str)
                    .and_then(|l| LanguageCode::new(l).ok())
                {
                    Some(lang) => {
                        allowed_exact.insert((normalize_word(word), lang));
                    }
                    None => {
                        allowed_any_language.insert(normalize_word(word));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(candidates
        .into_iter()
        .filter(|c| {
            let key = c.key();
            allowed_any_language.contains(&key.0) || allowed_exact.contains(&key)
        })
        .collect())
}

/// [`suggest_related`] followed by [`filter_inappropriate`] when the request
/// asks for safe mode.
pub fn propose(
    gateway: &LlmGateway,
    vocab: &impl Vocabulary,
    req: &ExpansionRequest,
) -> Result<Vec<CandidateWord>, ExpansionError> {
    let candidates = suggest_related(gateway, vocab, req)?;
    if req.safe_mode {
        filter_inappropriate(gateway, candidates)
    } else {
        Ok(candidates)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedCandidate {
    pub word: String,
    pub language: LanguageCode,
    pub node_id: NodeId,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Already linked to the chosen node.
    DuplicateEdge,
    /// The candidate is the chosen node itself.
    SameAsChosen,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CommitReport {
    pub created_nodes: Vec<NodeId>,
    pub created_edges: Vec<EdgeId>,
    /// Known words that got a new edge to the chosen node.
    pub linked_existing: Vec<NodeId>,
    pub skipped: Vec<SkippedCandidate>,
}

/// Adds the learner's selection to the graph, linking every selected word
/// to the chosen node. New words get their gloss as annotation and the
/// relation as edge label. Either every candidate is applied or none is.
///
/// Whether a candidate is already known is re-checked here rather than
/// trusted from the suggestion, since the graph may have changed since.
pub fn commit_selection(
    store: &mut GraphStore,
    chosen: &NodeId,
    selected: &[CandidateWord],
) -> Result<CommitReport, ExpansionError> {
    if store.node(chosen).is_none() {
        return Err(GraphError::NotFound(chosen.to_string()).into());
    }
    let backup = store.clone();
    match apply_selection(store, chosen, selected) {
        Ok(report) => Ok(report),
        Err(e) => {
            *store = backup;
            Err(e.into())
        }
    }
}

fn apply_selection(
    store: &mut GraphStore,
    chosen: &NodeId,
    selected: &[CandidateWord],
) -> Result<CommitReport, GraphError> {
    let mut report = CommitReport::default();
    for candidate in selected {
        let edge = EdgeSpec {
            label: candidate.relation.trim().to_string(),
            ..Default::default()
        };
        let skip = |reason| SkippedCandidate {
            word: candidate.word.clone(),
            language: candidate.language.clone(),
            node_id: chosen.clone(),
            reason,
        };
        match store.find_node(&candidate.word, &candidate.language) {
            Some(existing) if &existing == chosen => report.skipped.push(skip(SkipReason::SameAsChosen)),
            Some(existing) => {
                if store.edge_between(chosen, &existing).is_some() {
                    report.skipped.push(SkippedCandidate {
                        node_id: existing,
                        ..skip(SkipReason::DuplicateEdge)
                    });
                } else {
                    report.created_edges.push(store.add_edge(chosen, &existing, edge)?);
                    report.linked_existing.push(existing);
                }
            }
            None => {
                let node = store.add_node(
                    &candidate.word,
                    candidate.language.clone(),
                    &candidate.gloss,
                    BTreeSet::new(),
                )?;
                report.created_edges.push(store.add_edge(chosen, &node, edge)?);
                report.created_nodes.push(node);
            }
        }
    }
    Ok(report)
}

/// Idempotent.
pub fn mark_used_for_expansion(store: &mut GraphStore, id: &NodeId) -> Result<(), ExpansionError> {
    Ok(store.mark_used_for_expansion(id)?)
}
