use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::model::{QuestionKind, Quiz, QuizQuestion, QuizResult, ResultEntry};
use super::QuizError;
use crate::graph::{
    atomic_write, to_pretty_json, DocType, GraphError, HyperEdgeId, NodeId, Workspace, QUIZZES_DIR,
};

/// One question with its outcome, as written to `quizzes/<quiz_id>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentQuestion {
    pub index: usize,
    pub kind: QuestionKind,
    pub target_word: String,
    pub prompt_text: String,
    pub options: Vec<String>,
    pub correct_answer: String,
    pub user_answer: String,
    pub is_correct: bool,
    pub flagged: bool,
    pub target_node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizDocument {
    pub quiz_id: String,
    pub generated_at: DateTime<Utc>,
    pub model: String,
    pub questions: Vec<DocumentQuestion>,
    pub completed_at: DateTime<Utc>,
}

impl QuizDocument {
    pub fn new(quiz: &Quiz, result: &QuizResult) -> Result<Self, QuizError> {
        if result.quiz_id != quiz.quiz_id {
            return Err(QuizError::InvalidRequest(format!(
                "result belongs to quiz {}, not {}",
                result.quiz_id, quiz.quiz_id
            )));
        }
        if result.entries.len() != quiz.questions.len() {
            return Err(QuizError::LengthMismatch {
                expected: quiz.questions.len(),
                got: result.entries.len(),
            });
        }
        Ok(Self {
            quiz_id: quiz.quiz_id.clone(),
            generated_at: quiz.generated_at,
            model: quiz.model_name.clone(),
            questions: quiz
                .questions
                .iter()
                .zip(&result.entries)
                .map(|(q, e)| DocumentQuestion {
                    index: q.index,
                    kind: q.kind,
                    target_word: q.target_word.clone(),
                    prompt_text: q.prompt_text.clone(),
                    options: q.options.clone(),
                    correct_answer: q.correct_answer.clone(),
                    user_answer: e.user_answer.clone(),
                    is_correct: e.is_correct,
                    flagged: e.flagged,
                    target_node: q.target_node.clone(),
                })
                .collect(),
            completed_at: result.completed_at,
        })
    }

    pub fn into_parts(self) -> (Quiz, QuizResult) {
        let mut questions = Vec::with_capacity(self.questions.len());
        let mut entries = Vec::with_capacity(self.questions.len());
        for q in self.questions {
            entries.push(ResultEntry {
                user_answer: q.user_answer,
                is_correct: q.is_correct,
                flagged: q.flagged,
            });
            questions.push(QuizQuestion {
                index: q.index,
                kind: q.kind,
                target_node: q.target_node,
                target_word: q.target_word,
                prompt_text: q.prompt_text,
                options: q.options,
                correct_answer: q.correct_answer,
            });
        }
        (
            Quiz {
                quiz_id: self.quiz_id.clone(),
                generated_at: self.generated_at,
                model_name: self.model,
                questions,
            },
            QuizResult {
                quiz_id: self.quiz_id,
                entries,
                completed_at: self.completed_at,
            },
        )
    }

    pub fn load(path: &Path) -> Result<Self, QuizError> {
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| {
            GraphError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            }
            .into()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersistReport {
    /// Relative to the data directory.
    pub document_ref: String,
    pub hyper_edge: Option<HyperEdgeId>,
    pub warnings: Vec<String>,
}

fn check_quiz_id(id: &str) -> Result<(), QuizError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(QuizError::InvalidRequest(format!("unsafe quiz id {id:?}")))
    }
}

/// Writes the quiz and its result to `quizzes/<quiz_id>.json` and links the
/// tested words with a quiz hyper-edge. Words deleted since generation are
/// left out; with fewer than two left the document is saved without a
/// hyper-edge. Confirming the same quiz again rewrites the document and
/// reuses its hyper-edge.
pub fn persist_quiz_result(
    workspace: &mut Workspace,
    quiz: &Quiz,
    result: &QuizResult,
) -> Result<PersistReport, QuizError> {
    check_quiz_id(&quiz.quiz_id)?;
    let document = QuizDocument::new(quiz, result)?;
    let document_ref = format!("{QUIZZES_DIR}/{}.json", quiz.quiz_id);
    atomic_write(&workspace.root().join(&document_ref), &to_pretty_json(&document))?;

    let mut warnings = Vec::new();
    let store = workspace.store();
    if let Some(existing) = store.hyper_edges().find(|h| h.document_ref == document_ref) {
        return Ok(PersistReport {
            document_ref,
            hyper_edge: Some(existing.id.clone()),
            warnings,
        });
    }
    let targets: BTreeSet<NodeId> = quiz.questions.iter().map(|q| q.target_node.clone()).collect();
    let surviving: BTreeSet<NodeId> = targets
        .iter()
        .filter(|id| store.node(id).is_some())
        .cloned()
        .collect();
    if surviving.len() < targets.len() {
        warnings.push(format!(
            "{} tested word(s) no longer in the graph",
            targets.len() - surviving.len()
        ));
    }
    let hyper_edge = if surviving.len() >= 2 {
        Some(workspace.mutate(|g| g.add_hyper_edge(surviving, DocType::Quiz, &document_ref))?)
    } else {
        warnings.push("fewer than 2 tested words remain; saved without a hyper-edge".into());
        None
    };
    Ok(PersistReport {
        document_ref,
        hyper_edge,
        warnings,
    })
}
