//! Quizzes over the least-clicked words: generation, grading, flagging and
//! persistence as quiz hyper-edge documents.

mod generate;
mod grade;
mod model;
mod persist;

use thiserror::Error;

use crate::graph::GraphError;
use crate::llm::LlmError;

pub use generate::{
    build_quiz, generate_questions, generate_quiz, quiz_targets, BuiltQuiz, GeneratedBatch,
    QuizOptions,
};
pub use grade::{flag_question, grade_quiz, grade_quiz_at, QuizSession};
pub use model::{
    structural_problem, QuestionKind, Quiz, QuizQuestion, QuizResult, ResultEntry, BLANK,
    MCQ_OPTIONS,
};
pub use persist::{persist_quiz_result, DocumentQuestion, PersistReport, QuizDocument};

pub use crate::text::normalize_answer;

#[derive(Debug, Error)]
pub enum QuizError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("the graph has no words to quiz")]
    EmptyGraph,
    #[error("no valid question could be generated: {0}")]
    GenerationFailed(String),
    #[error("expected {expected} answers, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("question index {index} out of range (quiz has {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("quiz has not been graded yet")]
    NotGraded,
    #[error("invalid quiz request: {0}")]
    InvalidRequest(String),
}

impl QuizError {
    pub fn code(&self) -> &'static str {
        match self {
            QuizError::Graph(e) => e.code(),
            QuizError::Llm(e) => e.code(),
            QuizError::EmptyGraph => "EmptyGraph",
            QuizError::GenerationFailed(_) => "GenerationFailed",
            QuizError::LengthMismatch { .. } => "LengthMismatch",
            QuizError::IndexOutOfRange { .. } => "IndexOutOfRange",
            QuizError::NotGraded => "NotGraded",
            QuizError::InvalidRequest(_) => "InvalidRequest",
        }
    }
}
