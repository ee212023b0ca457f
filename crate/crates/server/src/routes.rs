use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{delete, get, patch, post};
use axum::Router;
use chrono::{DateTime, Utc};
use diymkg_core::expansion::{
    commit_selection, propose, CandidateWord, CommitReport, ExpansionRequest,
};
use diymkg_core::graph::{
    EdgeEdit, EdgeId, EdgeSpec, GraphError, GraphStore, HyperEdgeDoc, HyperEdgeId, KnowledgeGraph,
    LanguageCode, NodeEdit, NodeId, RemovalReport, SnapshotRecord, Subgraph, WordEdge, WordNode,
};
use diymkg_core::llm::SUGGEST_RELATED;
use diymkg_core::normalize_word;
use diymkg_core::quiz::{
    generate_quiz, persist_quiz_result, quiz_targets, DocumentQuestion, PersistReport,
    QuestionKind, QuizDocument, QuizError, QuizOptions, QuizSession,
};
use serde::{Deserialize, Serialize};

use crate::extract::{Json, Path, Query};
use crate::{ApiError, AppState, LockedVocabulary, SuggestionBatch};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<axum::Json<T>, ApiError>;

fn ok<T>(value: T) -> ApiResult<T> {
    Ok(axum::Json(value))
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/graph", get(get_graph))
        .route("/nodes", post(create_node))
        .route("/nodes/lookup", get(lookup_node))
        .route("/nodes/{id}", get(get_node).patch(edit_node))
        .route("/nodes/{id}/click", post(click_node))
        .route("/nodes/{id}/subgraph", get(subgraph))
        .route("/edges", post(create_edge))
        .route("/edges/{id}", patch(edit_edge))
        .route("/elements/{id}", delete(remove_element))
        .route("/tags/{tag}", get(tagged))
        .route("/hyper_edges/{id}/document", get(hyper_edge_document))
        .route("/expand", post(expand))
        .route("/expand/commit", post(expand_commit))
        .route("/quiz", post(create_quiz))
        .route("/quiz/{id}", get(get_quiz))
        .route("/quiz/{id}/grade", post(grade_quiz))
        .route("/quiz/{id}/flags", post(flag_quiz))
        .route("/quiz/{id}/confirm", post(confirm_quiz))
        .route("/snapshots", get(list_snapshots).post(create_snapshot))
        .route("/snapshots/{name}/restore", post(restore_snapshot));
    Router::new()
        .nest("/api", api)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed here")
}

/// Applies a mutation and writes the graph through to disk; nothing changes
/// if either step fails.
fn mutate<T>(
    state: &AppState,
    f: impl FnOnce(&mut GraphStore) -> Result<T, GraphError>,
) -> Result<T, ApiError> {
    Ok(state.workspace.write().mutate(f)?)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

// ---- graph ------------------------------------------------------------

async fn get_graph(State(state): Shared) -> ApiResult<KnowledgeGraph> {
    ok(state.workspace.read().store().to_graph())
}

#[derive(Deserialize)]
struct NewNode {
    word: String,
    language: String,
    #[serde(default)]
    annotation: String,
    #[serde(default)]
    tags: BTreeSet<String>,
}

async fn create_node(
    State(state): Shared,
    Json(body): Json<NewNode>,
) -> Result<(StatusCode, axum::Json<WordNode>), ApiError> {
    let language = LanguageCode::new(&body.language)?;
    let node = mutate(&state, |g| {
        let id = g.add_node(&body.word, language, &body.annotation, body.tags)?;
        Ok(g.node(&id).cloned().expect("just added"))
    })?;
    Ok((StatusCode::CREATED, axum::Json(node)))
}

fn node_or_404(store: &GraphStore, id: &NodeId) -> Result<WordNode, ApiError> {
    store
        .node(id)
        .cloned()
        .ok_or_else(|| GraphError::NotFound(id.to_string()).into())
}

async fn get_node(State(state): Shared, Path(id): Path<String>) -> ApiResult<WordNode> {
    ok(node_or_404(state.workspace.read().store(), &NodeId::from(id))?)
}

#[derive(Deserialize)]
struct LookupQuery {
    word: String,
    language: String,
}

async fn lookup_node(State(state): Shared, Query(q): Query<LookupQuery>) -> ApiResult<WordNode> {
    let language = LanguageCode::new(&q.language)?;
    let ws = state.workspace.read();
    let id = ws
        .store()
        .find_node(&q.word, &language)
        .ok_or_else(|| GraphError::NotFound(format!("{:?} ({language})", q.word)))?;
    ok(node_or_404(ws.store(), &id)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodePatch {
    word: Option<String>,
    annotation: Option<String>,
    tags: Option<BTreeSet<String>>,
}

async fn edit_node(
    State(state): Shared,
    Path(id): Path<String>,
    Json(body): Json<NodePatch>,
) -> ApiResult<WordNode> {
    let edit = NodeEdit {
        word: body.word,
        annotation: body.annotation,
        tags: body.tags,
    };
    ok(mutate(&state, |g| g.edit_node(&NodeId::from(id), edit))?)
}

#[derive(Serialize)]
struct ClickCount {
    id: NodeId,
    click_count: u64,
}

async fn click_node(State(state): Shared, Path(id): Path<String>) -> ApiResult<ClickCount> {
    let id = NodeId::from(id);
    let click_count = mutate(&state, |g| g.increment_click(&id))?;
    ok(ClickCount { id, click_count })
}

#[derive(Deserialize)]
struct RadiusQuery {
    radius: Option<u32>,
}

async fn subgraph(
    State(state): Shared,
    Path(id): Path<String>,
    Query(q): Query<RadiusQuery>,
) -> ApiResult<Subgraph> {
    let radius = q.radius.unwrap_or(1);
    ok(state.workspace.read().store().subgraph_of(&NodeId::from(id), radius)?)
}

#[derive(Deserialize)]
struct NewEdge {
    source: NodeId,
    target: NodeId,
    #[serde(default)]
    label: String,
    #[serde(default)]
    tags: BTreeSet<String>,
    #[serde(default)]
    description: String,
}

async fn create_edge(
    State(state): Shared,
    Json(body): Json<NewEdge>,
) -> Result<(StatusCode, axum::Json<WordEdge>), ApiError> {
    let spec = EdgeSpec {
        label: body.label,
        tags: body.tags,
        description: body.description,
    };
    let edge = mutate(&state, |g| {
        let id = g.add_edge(&body.source, &body.target, spec)?;
        Ok(g.edge(&id).cloned().expect("just added"))
    })?;
    Ok((StatusCode::CREATED, axum::Json(edge)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgePatch {
    label: Option<String>,
    tags: Option<BTreeSet<String>>,
    description: Option<String>,
}

async fn edit_edge(
    State(state): Shared,
    Path(id): Path<String>,
    Json(body): Json<EdgePatch>,
) -> ApiResult<WordEdge> {
    let edit = EdgeEdit {
        label: body.label,
        tags: body.tags,
        description: body.description,
    };
    ok(mutate(&state, |g| g.edit_edge(&EdgeId::from(id), edit))?)
}

async fn remove_element(State(state): Shared, Path(id): Path<String>) -> ApiResult<RemovalReport> {
    ok(mutate(&state, |g| g.remove_element(&id))?)
}

#[derive(Serialize)]
struct TagMatches {
    tag: String,
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
}

async fn tagged(State(state): Shared, Path(tag): Path<String>) -> ApiResult<TagMatches> {
    let ws = state.workspace.read();
    let store = ws.store();
    ok(TagMatches {
        nodes: store.nodes_with_tag(&tag).into_iter().collect(),
        edges: store
            .edges()
            .filter(|e| e.tags.contains(&tag))
            .map(|e| e.id.clone())
            .collect(),
        tag,
    })
}

#[derive(Serialize)]
struct HyperEdgeDocument {
    hyper_edge: HyperEdgeDoc,
    members: Vec<WordNode>,
    /// `None` when the document file is missing or unreadable.
    content: Option<String>,
}

async fn hyper_edge_document(
    State(state): Shared,
    Path(id): Path<String>,
) -> ApiResult<HyperEdgeDocument> {
    let (hyper_edge, members, path) = {
        let ws = state.workspace.read();
        let store = ws.store();
        let hyper_edge = store
            .hyper_edge(&HyperEdgeId::from(id.clone()))
            .cloned()
            .ok_or(GraphError::NotFound(id))?;
        let members = hyper_edge
            .node_ids
            .iter()
            .filter_map(|n| store.node(n).cloned())
            .collect();
        let path = ws.root().join(&hyper_edge.document_ref);
        (hyper_edge, members, path)
    };
    let content = tokio::fs::read_to_string(&path).await.ok();
    ok(HyperEdgeDocument {
        hyper_edge,
        members,
        content,
    })
}

// ---- expansion --------------------------------------------------------

#[derive(Deserialize)]
struct ExpandBody {
    chosen_node: NodeId,
    template_id: Option<String>,
    target_languages: Option<BTreeSet<LanguageCode>>,
    max_candidates: Option<usize>,
    #[serde(default)]
    safe_mode: bool,
}

#[derive(Serialize)]
struct ExpandResponse {
    batch_id: String,
    chosen_node: NodeId,
    candidates: Vec<CandidateWord>,
}

async fn expand(State(state): Shared, Json(body): Json<ExpandBody>) -> ApiResult<ExpandResponse> {
    let chosen = node_or_404(state.workspace.read().store(), &body.chosen_node)?;
    let mut request = ExpansionRequest::monolingual(&chosen);
    request.template_id = body.template_id.unwrap_or_else(|| SUGGEST_RELATED.to_string());
    if let Some(langs) = body.target_languages {
        request.target_languages = langs;
    }
    if let Some(max) = body.max_candidates {
        request.max_candidates = max;
    }
    request.safe_mode = body.safe_mode || state.safe_mode;

    let worker = state.clone();
    let candidates = blocking(move || {
        let vocab = LockedVocabulary(&worker.workspace);
        Ok(propose(&worker.gateway, &vocab, &request)?)
    })
    .await?;
    let batch_id = state.remember_batch(SuggestionBatch {
        chosen_node: chosen.id.clone(),
        candidates: candidates.clone(),
    });
    ok(ExpandResponse {
        batch_id,
        chosen_node: chosen.id,
        candidates,
    })
}

#[derive(Deserialize)]
struct CommitBody {
    chosen_node: NodeId,
    /// When given, every selected word must come from that batch.
    batch_id: Option<String>,
    #[serde(default)]
    selected: Vec<CandidateWord>,
}

async fn expand_commit(State(state): Shared, Json(body): Json<CommitBody>) -> ApiResult<CommitReport> {
    if let Some(batch_id) = &body.batch_id {
        let batch = state
            .batch(batch_id)
            .ok_or_else(|| ApiError::not_found(format!("suggestion batch {batch_id}")))?;
        if batch.chosen_node != body.chosen_node {
            return Err(ApiError::invalid_selection(format!(
                "batch {batch_id} was suggested for {}, not {}",
                batch.chosen_node, body.chosen_node
            )));
        }
        let offered: HashSet<(String, LanguageCode)> = batch
            .candidates
            .iter()
            .map(|c| (normalize_word(&c.word), c.language.clone()))
            .collect();
        if let Some(extra) = body
            .selected
            .iter()
            .find(|c| !offered.contains(&(normalize_word(&c.word), c.language.clone())))
        {
            return Err(ApiError::invalid_selection(format!(
                "{:?} ({}) was not suggested in batch {batch_id}",
                extra.word, extra.language
            )));
        }
    }
    let mut ws = state.workspace.write();
    let report = ws.mutate(|g| commit_selection(g, &body.chosen_node, &body.selected))?;
    ok(report)
}

// ---- quizzes ----------------------------------------------------------

#[derive(Deserialize)]
struct QuizBody {
    n_mcq: Option<usize>,
    n_fib: Option<usize>,
    #[serde(alias = "language_filter")]
    languages: Option<BTreeSet<LanguageCode>>,
}

#[derive(Serialize)]
struct QuestionView {
    index: usize,
    kind: QuestionKind,
    prompt_text: String,
    options: Vec<String>,
}

/// A quiz as shown before grading: answers and target words withheld.
#[derive(Serialize)]
struct QuizView {
    quiz_id: String,
    generated_at: DateTime<Utc>,
    model_name: String,
    questions: Vec<QuestionView>,
    graded: bool,
    warnings: Vec<String>,
}

fn quiz_view(session: &QuizSession, warnings: Vec<String>) -> QuizView {
    let quiz = &session.quiz;
    QuizView {
        quiz_id: quiz.quiz_id.clone(),
        generated_at: quiz.generated_at,
        model_name: quiz.model_name.clone(),
        questions: quiz
            .questions
            .iter()
            .map(|q| QuestionView {
                index: q.index,
                kind: q.kind,
                prompt_text: q.prompt_text.clone(),
                options: q.options.clone(),
            })
            .collect(),
        graded: session.result.is_some(),
        warnings,
    }
}

async fn create_quiz(State(state): Shared, Json(body): Json<QuizBody>) -> ApiResult<QuizView> {
    let defaults = QuizOptions::default();
    let opts = QuizOptions {
        n_mcq: body.n_mcq.unwrap_or(defaults.n_mcq),
        n_fib: body.n_fib.unwrap_or(defaults.n_fib),
        language_filter: body.languages,
        ..defaults
    };
    let (mcq, fib) = quiz_targets(state.workspace.read().store(), &opts)?;
    let found = mcq.len() + fib.len();

    let worker = state.clone();
    let rounds = opts.regeneration_rounds;
    let mut built = blocking(move || Ok(generate_quiz(&worker.gateway, &mcq, &fib, rounds)?)).await?;
    if found < opts.n_mcq + opts.n_fib {
        built
            .warnings
            .insert(0, format!("only {found} word(s) available; quiz is shorter"));
    }
    let session = QuizSession::new(built.quiz);
    let view = quiz_view(&session, built.warnings);
    state.quizzes.lock().insert(view.quiz_id.clone(), session);
    ok(view)
}

fn with_session<T>(
    state: &AppState,
    quiz_id: &str,
    f: impl FnOnce(&mut QuizSession) -> Result<T, ApiError>,
) -> Result<T, ApiError> {
    let mut quizzes = state.quizzes.lock();
    let session = quizzes
        .get_mut(quiz_id)
        .ok_or_else(|| ApiError::not_found(format!("quiz {quiz_id}")))?;
    f(session)
}

/// A graded quiz with answers revealed.
#[derive(Serialize)]
struct GradedView {
    quiz_id: String,
    completed_at: DateTime<Utc>,
    correct_count: usize,
    total: usize,
    questions: Vec<DocumentQuestion>,
}

fn graded_view(session: &QuizSession) -> Result<GradedView, ApiError> {
    let result = session.result.as_ref().ok_or(QuizError::NotGraded)?;
    let doc = QuizDocument::new(&session.quiz, result)?;
    Ok(GradedView {
        quiz_id: doc.quiz_id,
        completed_at: doc.completed_at,
        correct_count: result.correct_count(),
        total: doc.questions.len(),
        questions: doc.questions,
    })
}

#[derive(Serialize)]
#[serde(untagged)]
enum SessionView {
    Open(QuizView),
    Graded(GradedView),
}

async fn get_quiz(State(state): Shared, Path(id): Path<String>) -> ApiResult<SessionView> {
    ok(with_session(&state, &id, |s| {
        Ok(match s.result {
            Some(_) => SessionView::Graded(graded_view(s)?),
            None => SessionView::Open(quiz_view(s, Vec::new())),
        })
    })?)
}

#[derive(Deserialize)]
struct GradeBody {
    answers: Vec<String>,
}

async fn grade_quiz(
    State(state): Shared,
    Path(id): Path<String>,
    Json(body): Json<GradeBody>,
) -> ApiResult<GradedView> {
    ok(with_session(&state, &id, |s| {
        s.grade(&body.answers)?;
        graded_view(s)
    })?)
}

#[derive(Deserialize)]
struct Flag {
    index: usize,
    flagged: bool,
}

#[derive(Deserialize)]
struct FlagsBody {
    flags: Vec<Flag>,
}

async fn flag_quiz(
    State(state): Shared,
    Path(id): Path<String>,
    Json(body): Json<FlagsBody>,
) -> ApiResult<GradedView> {
    ok(with_session(&state, &id, |s| {
        let len = s
            .result
            .as_ref()
            .ok_or(QuizError::NotGraded)?
            .entries
            .len();
        if let Some(bad) = body.flags.iter().find(|f| f.index >= len) {
            return Err(QuizError::IndexOutOfRange { index: bad.index, len }.into());
        }
        for flag in &body.flags {
            s.flag(flag.index, flag.flagged)?;
        }
        graded_view(s)
    })?)
}

async fn confirm_quiz(State(state): Shared, Path(id): Path<String>) -> ApiResult<PersistReport> {
    let (quiz, result) = with_session(&state, &id, |s| {
        let result = s.result.clone().ok_or(QuizError::NotGraded)?;
        Ok((s.quiz.clone(), result))
    })?;
    let mut ws = state.workspace.write();
    ok(persist_quiz_result(&mut ws, &quiz, &result)?)
}

// ---- snapshots --------------------------------------------------------

async fn list_snapshots(State(state): Shared) -> ApiResult<Vec<SnapshotRecord>> {
    ok(state.workspace.read().list_snapshots()?)
}

#[derive(Deserialize)]
struct SnapshotBody {
    name: String,
}

async fn create_snapshot(
    State(state): Shared,
    Json(body): Json<SnapshotBody>,
) -> Result<(StatusCode, axum::Json<SnapshotRecord>), ApiError> {
    // The write lock keeps the copy consistent with concurrent mutations.
    let record = state.workspace.write().snapshot_create(&body.name)?;
    Ok((StatusCode::CREATED, axum::Json(record)))
}

#[derive(Serialize)]
struct RestoreResponse {
    restored: String,
    backup: SnapshotRecord,
    graph: KnowledgeGraph,
}

async fn restore_snapshot(State(state): Shared, Path(name): Path<String>) -> ApiResult<RestoreResponse> {
    let mut ws = state.workspace.write();
    let report = ws.snapshot_restore(&name)?;
    ok(RestoreResponse {
        restored: report.restored,
        backup: report.backup,
        graph: ws.store().to_graph(),
    })
}
