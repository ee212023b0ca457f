use std::collections::BTreeSet;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::warn;

use super::model::{structural_problem, QuestionKind, Quiz, QuizQuestion};
use super::QuizError;
use crate::graph::{GraphStore, LanguageCode, WordNode};
use crate::llm::{LlmError, LlmGateway, LlmTask, GEN_FIB, GEN_MCQ};
use crate::text::{normalize_answer, normalize_word};

fn default_mcq() -> usize {
    2
}

fn default_fib() -> usize {
    3
}

fn default_rounds() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizOptions {
    #[serde(default = "default_mcq")]
    pub n_mcq: usize,
    #[serde(default = "default_fib")]
    pub n_fib: usize,
    #[serde(default)]
    pub language_filter: Option<BTreeSet<LanguageCode>>,
    /// Extra generation calls for targets whose question came back invalid.
    #[serde(default = "default_rounds")]
    pub regeneration_rounds: u32,
}

impl Default for QuizOptions {
    fn default() -> Self {
        Self {
            n_mcq: default_mcq(),
            n_fib: default_fib(),
            language_filter: None,
            regeneration_rounds: default_rounds(),
        }
    }
}

/// A quiz plus anything worth telling the learner about how it was built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuiltQuiz {
    pub quiz: Quiz,
    pub warnings: Vec<String>,
}

/// Questions generated for one kind, plus the words that got none.
#[derive(Debug, Clone, Default)]
pub struct GeneratedBatch {
    pub questions: Vec<QuizQuestion>,
    pub unanswered: Vec<WordNode>,
    pub calls: u32,
}

fn template_for(kind: QuestionKind) -> &'static str {
    match kind {
        QuestionKind::Mcq => GEN_MCQ,
        QuestionKind::Fib => GEN_FIB,
    }
}

fn str_field<'a>(item: &'a Value, key: &str) -> Option<&'a str> {
    item.get(key).and_then(Value::as_str)
}

/// Turns one generated item into a question for one of `pending`, if it is
/// well-formed. Returns the index into `pending` it answers.
fn accept(
    item: &Value,
    kind: QuestionKind,
    pending: &[WordNode],
) -> Result<(usize, QuizQuestion), String> {
    if let Some(t) = str_field(item, "type") {
        if !t.trim().eq_ignore_ascii_case(kind.as_str()) {
            return Err(format!("type {t:?} where {} expected", kind.as_str()));
        }
    }
    let prompt_text = str_field(item, "question").ok_or("missing question")?.trim().to_string();
    let answer = str_field(item, "answer").ok_or("missing answer")?.trim().to_string();
    let options: Vec<String> = match item.get("options") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|o| o.as_str().map(|s| s.trim().to_string()).ok_or("non-string option"))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err("options is not an array".into()),
    };

    let slot = match str_field(item, "target_word") {
        Some(word) => {
            let key = normalize_word(word);
            pending
                .iter()
                .position(|n| normalize_word(&n.word) == key)
                .ok_or_else(|| format!("target_word {word:?} was not requested"))?
        }
        None if pending.len() == 1 => 0,
        None => return Err("missing target_word".into()),
    };

    if let Some(problem) = structural_problem(kind, &prompt_text, &options, &answer) {
        return Err(problem);
    }
    // Store the answer exactly as spelled in the options.
    let correct_answer = match kind {
        QuestionKind::Mcq => {
            let key = normalize_answer(&answer);
            options
                .iter()
                .find(|o| normalize_answer(o) == key)
                .cloned()
                .expect("checked by structural_problem")
        }
        QuestionKind::Fib => answer,
    };
    let target = &pending[slot];
    Ok((
        slot,
        QuizQuestion {
            index: 0,
            kind,
            target_node: target.id.clone(),
            target_word: target.word.clone(),
            prompt_text,
            options,
            correct_answer,
        },
    ))
}

/// Generates one question of `kind` per target. Targets whose answer is
/// missing or structurally invalid are asked for again, up to
/// `regeneration_rounds` more calls.
///
/// Malformed model output counts as an empty round; transport errors abort.
pub fn generate_questions(
    gateway: &LlmGateway,
    kind: QuestionKind,
    targets: &[WordNode],
    regeneration_rounds: u32,
) -> Result<GeneratedBatch, LlmError> {
    let mut pending: Vec<WordNode> = targets.to_vec();
    let mut found: Vec<(WordNode, QuizQuestion)> = Vec::new();
    let mut calls = 0;

    for _ in 0..=regeneration_rounds {
        if pending.is_empty() {
            break;
        }
        let words: Vec<Value> = pending
            .iter()
            .map(|n| json!({"word": n.word, "language": n.language}))
            .collect();
        let task = LlmTask::new(template_for(kind))
            .var("words", Value::Array(words).to_string())
            .var("count", pending.len().to_string());
        calls += 1;
        let items = match gateway.complete_structured(&task) {
            Ok(s) => s.value.as_array().cloned().unwrap_or_default(),
            Err(LlmError::MalformedOutput { .. }) => {
                warn!(kind = kind.as_str(), "question batch unparseable");
                continue;
            }
            Err(e) => return Err(e),
        };
        for item in &items {
            match accept(item, kind, &pending) {
                Ok((slot, question)) => {
                    let target = pending.remove(slot);
                    found.push((target, question));
                }
                Err(reason) => warn!(kind = kind.as_str(), %reason, "rejected generated question"),
            }
            if pending.is_empty() {
                break;
            }
        }
    }

    // Keep the order of `targets`.
    let mut questions = Vec::with_capacity(found.len());
    for target in targets {
        if let Some(pos) = found.iter().position(|(t, _)| t.id == target.id) {
            questions.push(found.swap_remove(pos).1);
        }
    }
    Ok(GeneratedBatch {
        questions,
        unanswered: pending,
        calls,
    })
}

/// Builds a quiz from explicit MCQ and FIB target words. Both kinds are
/// generated concurrently.
pub fn generate_quiz(
    gateway: &LlmGateway,
    mcq_targets: &[WordNode],
    fib_targets: &[WordNode],
    regeneration_rounds: u32,
) -> Result<BuiltQuiz, QuizError> {
    let run = |kind, targets: &[WordNode]| -> Result<GeneratedBatch, LlmError> {
        if targets.is_empty() {
            Ok(GeneratedBatch::default())
        } else {
            generate_questions(gateway, kind, targets, regeneration_rounds)
        }
    };
    let (mcq, fib) = std::thread::scope(|scope| {
        let mcq = scope.spawn(|| run(QuestionKind::Mcq, mcq_targets));
        let fib = run(QuestionKind::Fib, fib_targets);
        (mcq.join().expect("mcq generation panicked"), fib)
    });
    let (mcq, fib) = (mcq?, fib?);

    let mut warnings = Vec::new();
    for (kind, batch) in [(QuestionKind::Mcq, &mcq), (QuestionKind::Fib, &fib)] {
        for word in &batch.unanswered {
            warnings.push(format!(
                "no valid {} question for {:?} after {} attempt(s); skipped",
                kind.as_str(),
                word.word,
                batch.calls
            ));
        }
    }

    let mut questions: Vec<QuizQuestion> = mcq.questions.into_iter().chain(fib.questions).collect();
    if questions.is_empty() {
        return Err(QuizError::GenerationFailed(warnings.join("; ")));
    }
    for (i, q) in questions.iter_mut().enumerate() {
        q.index = i;
    }
    Ok(BuiltQuiz {
        quiz: Quiz {
            quiz_id: uuid::Uuid::now_v7().to_string(),
            generated_at: Utc::now(),
            model_name: gateway.model_name().to_string(),
            questions,
        },
        warnings,
    })
}

/// Lowest-click words split into MCQ targets (first `n_mcq`) and FIB
/// targets (the rest).
pub fn quiz_targets(
    store: &GraphStore,
    opts: &QuizOptions,
) -> Result<(Vec<WordNode>, Vec<WordNode>), QuizError> {
    let wanted = opts.n_mcq + opts.n_fib;
    if wanted == 0 {
        return Err(QuizError::InvalidRequest("quiz needs at least one question".into()));
    }
    if store.is_empty() {
        return Err(QuizError::EmptyGraph);
    }
    let mut targets = store.lowest_click_nodes(wanted, opts.language_filter.as_ref());
    if targets.is_empty() {
        return Err(QuizError::EmptyGraph);
    }
    let fib = targets.split_off(opts.n_mcq.min(targets.len()));
    Ok((targets, fib))
}

/// Builds a quiz over the least-clicked words.
pub fn build_quiz(
    gateway: &LlmGateway,
    store: &GraphStore,
    opts: &QuizOptions,
) -> Result<BuiltQuiz, QuizError> {
    let (mcq, fib) = quiz_targets(store, opts)?;
    let shortfall = opts.n_mcq + opts.n_fib - (mcq.len() + fib.len());
    let mut built = generate_quiz(gateway, &mcq, &fib, opts.regeneration_rounds)?;
    if shortfall > 0 {
        built.warnings.insert(
            0,
            format!("only {} word(s) available; quiz is shorter", mcq.len() + fib.len()),
        );
    }
    Ok(built)
}
