//! Quiz-correctness study: generate questions over sampled words, have a
//! judge model rate each question-answer pair, and tabulate per language
//! and question kind.

use std::collections::BTreeMap;
use std::io::Write;

use diymkg_core::graph::{LanguageCode, WordNode};
use diymkg_core::llm::{LlmError, LlmGateway, LlmTask, OutputShape, JUDGE_QA};
use diymkg_core::quiz::{generate_questions, QuestionKind, QuizQuestion};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JudgeVerdict {
    pub language: String,
    pub kind: QuestionKind,
    pub index: usize,
    pub target_word: String,
    pub question: String,
    pub options: String,
    pub answer: String,
    /// `None` when the judge's reply could not be read.
    pub verdict: Option<Verdict>,
    pub judge_model: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectnessRow {
    pub language: String,
    pub kind: QuestionKind,
    pub generated: usize,
    pub judged: usize,
    pub correct: usize,
    pub unjudged: usize,
    /// Percentage of judged questions rated correct; empty when none were judged.
    pub pct_correct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuizEvalReport {
    pub rows: Vec<CorrectnessRow>,
    pub verdicts: Vec<JudgeVerdict>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuizEvalConfig {
    pub n_per_type: usize,
    pub seed: u64,
    pub regeneration_rounds: u32,
}

fn parse_verdict(value: &Value) -> Option<(Verdict, String)> {
    let verdict = match value.get("verdict")?.as_str()?.trim().to_ascii_lowercase().as_str() {
        "correct" => Verdict::Correct,
        "incorrect" => Verdict::Incorrect,
        _ => return None,
    };
    let rationale = value
        .get("rationale")
        .and_then(Value::as_str)
        .unwrap_or("")
        .trim()
        .to_string();
    Some((verdict, rationale))
}

/// Asks the judge about one question. Unreadable judgements come back as
/// `None`; transport failures are errors.
pub fn judge_question(
    judge: &LlmGateway,
    language: &LanguageCode,
    question: &QuizQuestion,
) -> Result<Option<(Verdict, String)>, LlmError> {
    let options = if question.options.is_empty() {
        "(none)".to_string()
    } else {
        question.options.join(" | ")
    };
    let task = LlmTask::new(JUDGE_QA)
        .var("language", language.as_str())
        .var("kind", question.kind.as_str())
        .var("question", question.prompt_text.as_str())
        .var("options", options)
        .var("answer", question.correct_answer.as_str())
        .expects(OutputShape::JsonObject);
    match judge.complete_structured(&task) {
        Ok(s) => Ok(parse_verdict(&s.value)),
        Err(LlmError::MalformedOutput { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Builds the correctness table for `verdicts`; kept separate so the
/// arithmetic can be checked on its own.
pub fn tabulate(verdicts: &[JudgeVerdict]) -> Vec<CorrectnessRow> {
    let mut groups: BTreeMap<(String, &'static str), (QuestionKind, usize, usize, usize)> = BTreeMap::new();
    for v in verdicts {
        let entry = groups
            .entry((v.language.clone(), v.kind.as_str()))
            .or_insert((v.kind, 0, 0, 0));
        match v.verdict {
            Some(Verdict::Correct) => {
                entry.1 += 1;
                entry.2 += 1;
            }
            Some(Verdict::Incorrect) => entry.1 += 1,
            None => entry.3 += 1,
        }
    }
    groups
        .into_iter()
        .map(|((language, _), (kind, judged, correct, unjudged))| CorrectnessRow {
            language,
            kind,
            generated: judged + unjudged,
            judged,
            correct,
            unjudged,
            pct_correct: (judged > 0).then(|| 100.0 * correct as f64 / judged as f64),
        })
        .collect()
}

fn sample_words(words: &[WordNode], n: usize, rng: &mut ChaCha8Rng) -> Vec<WordNode> {
    let n = n.min(words.len());
    let mut idx = sample(rng, words.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| words[i].clone()).collect()
}

/// For each language, samples `n_per_type` words for MCQ and, separately,
/// for FIB, generates the questions, and has `judge` rate every one.
pub fn run_quiz_eval(
    config: &QuizEvalConfig,
    vocabularies: &BTreeMap<LanguageCode, Vec<WordNode>>,
    generator: &LlmGateway,
    judge: &LlmGateway,
) -> Result<QuizEvalReport, EvalError> {
    if config.n_per_type == 0 {
        return Err(EvalError::InvalidConfig("n_per_type must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut verdicts = Vec::new();
    let mut warnings = Vec::new();

    for (language, words) in vocabularies {
        if words.len() < config.n_per_type {
            warnings.push(format!(
                "{language}: only {} words for {} questions per type",
                words.len(),
                config.n_per_type
            ));
        }
        for kind in [QuestionKind::Mcq, QuestionKind::Fib] {
            let targets = sample_words(words, config.n_per_type, &mut rng);
            let batch = generate_questions(generator, kind, &targets, config.regeneration_rounds)?;
            if !batch.unanswered.is_empty() {
                warnings.push(format!(
                    "{language} {}: {} word(s) got no valid question",
                    kind.as_str(),
                    batch.unanswered.len()
                ));
            }
            for (index, q) in batch.questions.iter().enumerate() {
                let judged = judge_question(judge, language, q)?;
                let (verdict, rationale) = match judged {
                    Some((v, r)) => (Some(v), r),
                    None => (None, String::new()),
                };
                verdicts.push(JudgeVerdict {
                    language: language.to_string(),
                    kind,
                    index,
                    target_word: q.target_word.clone(),
                    question: q.prompt_text.clone(),
                    options: q.options.join(" | "),
                    answer: q.correct_answer.clone(),
                    verdict,
                    judge_model: judge.model_name().to_string(),
                    rationale,
                });
            }
        }
    }
    let unjudged = verdicts.iter().filter(|v| v.verdict.is_none()).count();
    if unjudged > 0 {
        warnings.push(format!("{unjudged} question(s) unjudged and left out of the percentages"));
    }
    Ok(QuizEvalReport {
        rows: tabulate(&verdicts),
        verdicts,
        warnings,
    })
}

#[derive(Serialize)]
struct TableLine<'a> {
    language: &'a str,
    kind: &'a str,
    generated: usize,
    judged: usize,
    correct: usize,
    unjudged: usize,
    pct_correct: String,
}

/// Table CSV; percentages are written with one decimal.
pub fn write_table_csv<W: Write>(rows: &[CorrectnessRow], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(TableLine {
            language: &r.language,
            kind: r.kind.as_str(),
            generated: r.generated,
            judged: r.judged,
            correct: r.correct,
            unjudged: r.unjudged,
            pct_correct: r.pct_correct.map(|p| format!("{p:.1}")).unwrap_or_default(),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct VerdictLine<'a> {
    language: &'a str,
    kind: &'a str,
    index: usize,
    target_word: &'a str,
    question: &'a str,
    options: &'a str,
    answer: &'a str,
    verdict: &'a str,
    judge_model: &'a str,
    rationale: &'a str,
}

pub fn write_verdicts_csv<W: Write>(verdicts: &[JudgeVerdict], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for v in verdicts {
        w.serialize(VerdictLine {
            language: &v.language,
            kind: v.kind.as_str(),
            index: v.index,
            target_word: &v.target_word,
            question: &v.question,
            options: &v.options,
            answer: &v.answer,
            verdict: match v.verdict {
                Some(Verdict::Correct) => "correct",
                Some(Verdict::Incorrect) => "incorrect",
                None => "unjudged",
            },
            judge_model: &v.judge_model,
            rationale: &v.rationale,
        })?;
    }
    w.flush()?;
    Ok(())
}
