use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::text::normalize_answer;

/// The blank in a fill-in-the-blank prompt.
pub const BLANK: &str = "____";
pub const MCQ_OPTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionKind {
    Mcq,
    Fib,
}

impl QuestionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::Mcq => "mcq",
            QuestionKind::Fib => "fib",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizQuestion {
    pub index: usize,
    pub kind: QuestionKind,
    pub target_node: NodeId,
    pub target_word: String,
    pub prompt_text: String,
    /// Exactly four for MCQ, empty for FIB.
    pub options: Vec<String>,
    pub correct_answer: String,
}

/// Number of blank markers in `prompt`: runs of three or more underscores.
/// A run only counts as a well-formed blank if it is exactly `____`, so the
/// second value is false when some run has another length.
fn blank_runs(prompt: &str) -> (usize, bool) {
    let mut runs = 0;
    let mut all_exact = true;
    let mut current = 0;
    for c in prompt.chars().chain(std::iter::once('\0')) {
        if c == '_' {
            current += 1;
            continue;
        }
        if current >= 3 {
            runs += 1;
            all_exact &= current == BLANK.len();
        }
        current = 0;
    }
    (runs, all_exact)
}

/// Why a question violates the structural invariants, if it does.
pub fn structural_problem(
    kind: QuestionKind,
    prompt_text: &str,
    options: &[String],
    correct_answer: &str,
) -> Option<String> {
    if prompt_text.trim().is_empty() {
        return Some("empty question text".into());
    }
    if normalize_answer(correct_answer).is_empty() {
        return Some("empty answer".into());
    }
    match kind {
        QuestionKind::Mcq => {
            if options.len() != MCQ_OPTIONS {
                return Some(format!("{} options instead of {MCQ_OPTIONS}", options.len()));
            }
            let normalized: Vec<String> = options.iter().map(|o| normalize_answer(o)).collect();
            if normalized.iter().any(String::is_empty) {
                return Some("empty option".into());
            }
            for (i, a) in normalized.iter().enumerate() {
                if normalized[i + 1..].contains(a) {
                    return Some(format!("duplicate option {:?}", options[i]));
                }
            }
            if !normalized.contains(&normalize_answer(correct_answer)) {
                return Some("answer is not among the options".into());
            }
            None
        }
        QuestionKind::Fib => {
            if !options.is_empty() {
                return Some("fill-in-the-blank question has options".into());
            }
            match blank_runs(prompt_text) {
                (1, true) => None,
                (1, false) => Some(format!("blank is not exactly {BLANK:?}")),
                (n, _) => Some(format!("{n} blanks instead of 1")),
            }
        }
    }
}

impl QuizQuestion {
    pub fn problem(&self) -> Option<String> {
        structural_problem(self.kind, &self.prompt_text, &self.options, &self.correct_answer)
    }

    pub fn is_valid(&self) -> bool {
        self.problem().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quiz {
    pub quiz_id: String,
    pub generated_at: DateTime<Utc>,
    pub model_name: String,
    pub questions: Vec<QuizQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub user_answer: String,
    pub is_correct: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizResult {
    pub quiz_id: String,
    pub entries: Vec<ResultEntry>,
    pub completed_at: DateTime<Utc>,
}

impl QuizResult {
    pub fn correct_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_correct).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mcq_rules() {
        let good = opts(&["gato", "perro", "casa", "mesa"]);
        assert_eq!(structural_problem(QuestionKind::Mcq, "¿Qué animal maúlla?", &good, "gato"), None);
        assert!(structural_problem(QuestionKind::Mcq, "q", &good, "Gato ").is_none());
        assert!(structural_problem(QuestionKind::Mcq, "q", &good, "pez").is_some());
        assert!(structural_problem(QuestionKind::Mcq, "q", &good[..3], "gato").is_some());
        let dup = opts(&["gato", "perro", "GATO", "mesa"]);
        assert!(structural_problem(QuestionKind::Mcq, "q", &dup, "gato").is_some());
        assert!(structural_problem(QuestionKind::Mcq, " ", &good, "gato").is_some());
    }

    #[test]
    fn fib_rules() {
        let none: Vec<String> = vec![];
        assert_eq!(structural_problem(QuestionKind::Fib, "El ____ maúlla.", &none, "gato"), None);
        assert!(structural_problem(QuestionKind::Fib, "El gato maúlla.", &none, "gato").is_some());
        assert!(structural_problem(QuestionKind::Fib, "El ____ y el ____.", &none, "gato").is_some());
        assert!(structural_problem(QuestionKind::Fib, "El ________ maúlla.", &none, "gato").is_some());
        assert!(structural_problem(QuestionKind::Fib, "El _____ maúlla.", &none, "gato").is_some());
        assert!(structural_problem(QuestionKind::Fib, "snake_case ____ ok", &none, "x").is_none());
        assert!(structural_problem(QuestionKind::Fib, "El ____ maúlla.", &opts(&["a"]), "gato").is_some());
        assert!(structural_problem(QuestionKind::Fib, "____", &none, "").is_some());
    }
}
