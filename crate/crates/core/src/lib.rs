//! Core of a self-hosted multilingual vocabulary knowledge graph.
//!
//! - [`graph`]: words, links, document hyper-edges, clicks, JSON files and
//!   snapshots.
//! - [`llm`]: prompt templates and a chat-completion gateway.
//! - [`expansion`]: LLM-suggested related words, safe-mode filtering and
//!   human-selected commits.
//! - [`quiz`]: quiz generation from the least-clicked words, grading,
//!   flagging and persistence.

pub mod expansion;
pub mod graph;
pub mod llm;
pub mod quiz;
pub mod text;

pub use text::{normalize_answer, normalize_word};
