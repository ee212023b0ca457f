//! Iterative vocabulary expansion: start from one word, expand it, then keep
//! expanding a randomly chosen not-yet-expanded word.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use diymkg_core::expansion::{
    commit_selection, mark_used_for_expansion, suggest_related, ExpansionError, ExpansionRequest,
};
use diymkg_core::graph::{GraphStore, LanguageCode, NodeEdit};
use diymkg_core::llm::{LlmError, LlmGateway, LlmTask, DESCRIBE_WORD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use tracing::warn;

use crate::EvalError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionRunConfig {
    pub run_id: String,
    pub language: LanguageCode,
    pub start_word: String,
    pub iterations: u32,
    pub seed: u64,
    /// Suggestion cap per iteration (the `m` of the 1 + m·t bound).
    pub max_candidates: usize,
    /// Annotate each new word with a model-written description.
    pub describe: bool,
}

impl ExpansionRunConfig {
    pub fn new(language: LanguageCode, start_word: &str, iterations: u32, seed: u64) -> Self {
        Self {
            run_id: format!("{language}-{start_word}"),
            language,
            start_word: start_word.to_string(),
            iterations,
            seed,
            max_candidates: diymkg_core::expansion::DEFAULT_MAX_CANDIDATES,
            describe: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GrowthRecord {
    pub iteration: u32,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    /// Every word had been expanded; no further iteration was possible.
    Exhausted { after: u32 },
    /// A model call failed; records up to `after` are kept.
    Failed { after: u32, code: String, message: String },
}

#[derive(Debug, Clone)]
pub struct ExpansionRun {
    pub config: ExpansionRunConfig,
    /// One record per completed iteration, starting at 1.
    pub records: Vec<GrowthRecord>,
    pub vocabulary: GraphStore,
    pub outcome: RunOutcome,
    /// Iterations whose suggestions could not be parsed.
    pub empty_iterations: u32,
}

impl ExpansionRun {
    pub fn final_size(&self) -> usize {
        self.vocabulary.node_count()
    }
}

fn describe(gateway: &LlmGateway, word: &str, language: &LanguageCode) -> Result<String, LlmError> {
    let task = LlmTask::new(DESCRIBE_WORD)
        .var("word", word)
        .var("language", language.as_str());
    Ok(gateway.complete(&task)?.trim().to_string())
}

fn failed(after: u32, code: &str, message: String) -> RunOutcome {
    RunOutcome::Failed {
        after,
        code: code.to_string(),
        message,
    }
}

/// Runs one expansion experiment. Model failures end the run early but are
/// reported in the outcome, not as an error.
pub fn run_expansion_experiment(
    config: &ExpansionRunConfig,
    gateway: &LlmGateway,
) -> Result<ExpansionRun, EvalError> {
    if config.iterations == 0 {
        return Err(EvalError::InvalidConfig("iterations must be at least 1".into()));
    }
    if config.max_candidates == 0 {
        return Err(EvalError::InvalidConfig("max_candidates must be at least 1".into()));
    }

    let mut store = GraphStore::new();
    let mut current = store.add_node(&config.start_word, config.language.clone(), "", BTreeSet::new())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.iterations as usize);
    let mut empty_iterations = 0;

    let finish = |store, records, outcome, empty_iterations| {
        Ok(ExpansionRun {
            config: config.clone(),
            records,
            vocabulary: store,
            outcome,
            empty_iterations,
        })
    };

    if config.describe {
        match describe(gateway, &config.start_word, &config.language) {
            Ok(text) => {
                let edit = NodeEdit { annotation: Some(text), ..Default::default() };
                store.edit_node(&current, edit)?;
            }
            Err(e) => return finish(store, records, failed(0, e.code(), e.to_string()), 0),
        }
    }

    for t in 1..=config.iterations {
        let chosen = store.node(&current).cloned().expect("current word exists");
        let request = ExpansionRequest {
            max_candidates: config.max_candidates,
            ..ExpansionRequest::monolingual(&chosen)
        };
        let mut candidates = match suggest_related(gateway, &store, &request) {
            Ok(c) => c,
            Err(ExpansionError::Llm(LlmError::MalformedOutput { .. })) => {
                warn!(run = %config.run_id, iteration = t, "suggestions unparseable; nothing added");
                empty_iterations += 1;
                Vec::new()
            }
            Err(ExpansionError::Llm(e)) => {
                return finish(store, records, failed(t - 1, e.code(), e.to_string()), empty_iterations)
            }
            Err(e) => return Err(e.into()),
        };

        if config.describe {
            for c in candidates.iter_mut().filter(|c| !c.already_known) {
                match describe(gateway, &c.word, &c.language) {
                    Ok(text) => c.gloss = text,
                    Err(e) => {
                        return finish(store, records, failed(t - 1, e.code(), e.to_string()), empty_iterations)
                    }
                }
            }
        }
        commit_selection(&mut store, &current, &candidates)?;
        mark_used_for_expansion(&mut store, &current)?;
        records.push(GrowthRecord {
            iteration: t,
            vocab_size: store.node_count(),
        });

        if t == config.iterations {
            break;
        }
        let unused = store.unused_for_expansion();
        if unused.is_empty() {
            return finish(store, records, RunOutcome::Exhausted { after: t }, empty_iterations);
        }
        current = unused[rng.random_range(0..unused.len())].clone();
    }
    finish(store, records, RunOutcome::Completed, empty_iterations)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteConfig {
    pub languages: Vec<LanguageCode>,
    pub starts_per_language: usize,
    pub iterations: u32,
    pub seed: u64,
    pub max_candidates: usize,
    pub describe: bool,
}

/// One row of the tidy growth dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GrowthRow {
    pub run_id: String,
    pub language: String,
    pub start_word: String,
    pub iteration: u32,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub language: String,
    pub start_word: String,
    pub iterations_completed: u32,
    pub final_size: usize,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub runs: Vec<RunSummary>,
    pub rows: Vec<GrowthRow>,
}

/// Picks `n` distinct start words per language, deterministically from the
/// seed. Runs are named `<language>-<nn>`.
pub fn plan_suite(
    config: &SuiteConfig,
    pools: &BTreeMap<LanguageCode, Vec<String>>,
) -> Result<Vec<ExpansionRunConfig>, EvalError> {
    if config.starts_per_language == 0 {
        return Err(EvalError::InvalidConfig("starts_per_language must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut plan = Vec::new();
    for language in &config.languages {
        let pool: Vec<&String> = {
            let words = pools
                .get(language)
                .ok_or_else(|| EvalError::InvalidConfig(format!("no start-word pool for {language}")))?;
            let mut seen = BTreeSet::new();
            words
                .iter()
                .filter(|w| !w.trim().is_empty() && seen.insert(diymkg_core::normalize_word(w)))
                .collect()
        };
        if pool.len() < config.starts_per_language {
            return Err(EvalError::InvalidConfig(format!(
                "{language}: need {} distinct start words, pool has {}",
                config.starts_per_language,
                pool.len()
            )));
        }
        let picks = rand::seq::index::sample(&mut rng, pool.len(), config.starts_per_language);
        for (k, i) in picks.into_iter().enumerate() {
            plan.push(ExpansionRunConfig {
                run_id: format!("{language}-{k:02}"),
                language: language.clone(),
                start_word: pool[i].trim().to_string(),
                iterations: config.iterations,
                seed: rng.random(),
                max_candidates: config.max_candidates,
                describe: config.describe,
            });
        }
    }
    Ok(plan)
}

/// Runs every planned run in parallel and merges the results in run-id order.
pub fn run_experiment_suite(
    config: &SuiteConfig,
    pools: &BTreeMap<LanguageCode, Vec<String>>,
    gateway: &LlmGateway,
) -> Result<SuiteResult, EvalError> {
    let plan = plan_suite(config, pools)?;
    let mut runs: Vec<(ExpansionRunConfig, Result<ExpansionRun, EvalError>)> = plan
        .into_par_iter()
        .map(|c| {
            let result = run_expansion_experiment(&c, gateway);
            (c, result)
        })
        .collect();
    runs.sort_by(|a, b| a.0.run_id.cmp(&b.0.run_id));

    let mut result = SuiteResult {
        runs: Vec::new(),
        rows: Vec::new(),
    };
    for (c, run) in runs {
        let run = match run {
            Ok(run) => run,
            Err(e) => {
                result.runs.push(RunSummary {
                    run_id: c.run_id,
                    language: c.language.to_string(),
                    start_word: c.start_word,
                    iterations_completed: 0,
                    final_size: 0,
                    outcome: failed(0, "InvalidRun", e.to_string()),
                });
                continue;
            }
        };
        for r in &run.records {
            result.rows.push(GrowthRow {
                run_id: c.run_id.clone(),
                language: c.language.to_string(),
                start_word: c.start_word.clone(),
                iteration: r.iteration,
                vocab_size: r.vocab_size,
            });
        }
        result.runs.push(RunSummary {
            run_id: c.run_id.clone(),
            language: c.language.to_string(),
            start_word: c.start_word.clone(),
            iterations_completed: run.records.len() as u32,
            final_size: run.final_size(),
            outcome: run.outcome,
        });
    }
    Ok(result)
}

/// Mean and spread of final vocabulary sizes for one language, or `all`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeSummary {
    pub language: String,
    pub runs: usize,
    pub failed: usize,
    pub mean_final: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single run.
    pub std_final: f64,
    pub min_final: usize,
    pub max_final: usize,
}

pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-language summaries plus an `all` row. Failed runs are counted but
/// left out of the statistics.
pub fn summarize(runs: &[RunSummary]) -> Vec<SizeSummary> {
    let mut groups: BTreeMap<&str, Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry(&r.language).or_default().push(r);
    }
    let summary = |language: &str, members: &[&RunSummary]| {
        let ok: Vec<usize> = members
            .iter()
            .filter(|r| !matches!(r.outcome, RunOutcome::Failed { .. }))
            .map(|r| r.final_size)
            .collect();
        let (mean_final, std_final) =
            mean_and_std(&ok.iter().map(|&s| s as f64).collect::<Vec<_>>());
        SizeSummary {
            language: language.to_string(),
            runs: members.len(),
            failed: members.len() - ok.len(),
            mean_final,
            std_final,
            min_final: ok.iter().copied().min().unwrap_or(0),
            max_final: ok.iter().copied().max().unwrap_or(0),
        }
    };
    let mut out: Vec<SizeSummary> = groups.iter().map(|(l, m)| summary(l, m)).collect();
    if groups.len() > 1 {
        let all: Vec<&RunSummary> = runs.iter().collect();
        out.push(summary("all", &all));
    }
    out
}

pub fn write_growth_csv<W: Write>(rows: &[GrowthRow], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &[SizeSummary], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for row in summary {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

