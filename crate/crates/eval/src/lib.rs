//! Experiments over DIY-MKG: how fast iterative LLM expansion grows a
//! vocabulary, and how often generated quiz questions are judged correct.
//!
//! Everything runs against any [`LlmGateway`](diymkg_core::llm::LlmGateway);
//! [`SyntheticLexicon`] provides a deterministic offline backend.

pub mod expand;
pub mod lexicon;
pub mod plot;
pub mod quiz_eval;

use diymkg_core::expansion::ExpansionError;
use diymkg_core::graph::GraphError;
use diymkg_core::llm::LlmError;
use diymkg_core::quiz::QuizError;
use thiserror::Error;

pub use expand::{
    mean_and_std, plan_suite, run_expansion_experiment, run_experiment_suite, summarize,
    write_growth_csv, write_summary_csv, ExpansionRun, ExpansionRunConfig, GrowthRecord,
    GrowthRow, RunOutcome, RunSummary, SizeSummary, SuiteConfig, SuiteResult,
};
pub use lexicon::{stable_hash, SyntheticLexicon};
pub use plot::{curve_tables, emit_plot_data, CurveRow, CurveTable};
pub use quiz_eval::{
    judge_question, run_quiz_eval, tabulate, write_table_csv, write_verdicts_csv,
    CorrectnessRow, JudgeVerdict, QuizEvalConfig, QuizEvalReport, Verdict,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Quiz(#[from] QuizError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
