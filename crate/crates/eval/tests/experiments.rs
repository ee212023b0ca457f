use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::{Arc, Mutex};

use diymkg_core::graph::{GraphStore, LanguageCode, WordNode};
use diymkg_core::llm::{
    LlmBackendConfig, LlmGateway, MockBackend, MockFailure, MockReply, PromptLibrary,
    DESCRIBE_WORD, JUDGE_QA, SUGGEST_RELATED,
};
use diymkg_core::normalize_word;
use diymkg_eval::{
    curve_tables, emit_plot_data, mean_and_std, run_expansion_experiment, run_experiment_suite,
    run_quiz_eval, summarize, write_growth_csv, EvalError, ExpansionRunConfig, GrowthRow,
    QuizEvalConfig, RunOutcome, SuiteConfig, SyntheticLexicon,
};
use proptest::prelude::*;
use serde_json::{json, Value};

fn es() -> LanguageCode {
    LanguageCode::new("es").unwrap()
}

fn gateway(mock: MockBackend) -> LlmGateway {
    LlmGateway::with_backend(LlmBackendConfig::mock(), PromptLibrary::builtin(), Arc::new(mock))
}

fn reply_words(words: &[String], language: &str) -> MockReply {
    let items: Vec<Value> = words.iter().map(|w| json!({"word": w, "language": language})).collect();
    MockReply::text(Value::Array(items).to_string())
}

/// Each word's suggestions are its ten children in a prefix tree, so every
/// suggestion is new as long as no word is expanded twice.
fn fresh_words_mock() -> MockBackend {
    MockBackend::new()
        .generator(SUGGEST_RELATED, |r| {
            let w = &r.variables["word"];
            let kids: Vec<String> = (0..10).map(|i| format!("{w}.{i}")).collect();
            reply_words(&kids, &r.variables["language"])
        })
        .generator(DESCRIBE_WORD, |r| MockReply::text(format!("about {}", r.variables["word"])))
}

#[test]
fn fresh_suggestions_hit_the_upper_bound() {
    let gw = gateway(fresh_words_mock());
    let config = ExpansionRunConfig::new(es(), "raíz", 100, 7);
    let run = run_expansion_experiment(&config, &gw).unwrap();
    assert_eq!(run.outcome, RunOutcome::Completed);
    assert_eq!(run.records.len(), 100);
    for r in &run.records {
        assert_eq!(r.vocab_size, 1 + 10 * r.iteration as usize);
    }
    assert_eq!(run.vocabulary.node_count(), 1001);
    assert!(run.vocabulary.nodes().all(|n| n.annotation.starts_with("about ")));
}

#[test]
fn repeated_suggestions_saturate() {
    // Hand simulation: iteration 1 adds the five words (size 6); then each
    // of the five is expanded once with nothing new; after iteration 6
    // every word is used and the run stops.
    let five: Vec<String> = ["uno", "dos", "tres", "cuatro", "cinco"].map(String::from).to_vec();
    let mock = MockBackend::new()
        .generator(SUGGEST_RELATED, move |r| reply_words(&five, &r.variables["language"]))
        .generator(DESCRIBE_WORD, |_| MockReply::text("x"));
    let run = run_expansion_experiment(&ExpansionRunConfig::new(es(), "cero", 10, 1), &gateway(mock)).unwrap();
    let sizes: Vec<usize> = run.records.iter().map(|r| r.vocab_size).collect();
    assert_eq!(sizes, [6, 6, 6, 6, 6, 6]);
    assert_eq!(run.outcome, RunOutcome::Exhausted { after: 6 });
}

#[test]
fn iteration_count_contract() {
    let gw = gateway(fresh_words_mock());
    let zero = ExpansionRunConfig::new(es(), "a", 0, 1);
    assert!(matches!(run_expansion_experiment(&zero, &gw), Err(EvalError::InvalidConfig(_))));
    let one = run_expansion_experiment(&ExpansionRunConfig::new(es(), "a", 1, 1), &gw).unwrap();
    assert_eq!(one.records.len(), 1);
    assert_eq!(one.records[0].vocab_size, 11);
}

#[test]
fn transport_failure_keeps_partial_records() {
    let ok = |i: usize| reply_words(&[format!("w{i}a"), format!("w{i}b")], "es");
    let mock = MockBackend::new()
        .script(SUGGEST_RELATED, [ok(1), ok(2), ok(3), MockReply::fail(MockFailure::Transport)])
        .generator(DESCRIBE_WORD, |_| MockReply::text("x"));
    let run = run_expansion_experiment(&ExpansionRunConfig::new(es(), "a", 10, 3), &gateway(mock)).unwrap();
    assert_eq!(run.records.len(), 3);
    assert!(matches!(run.outcome, RunOutcome::Failed { after: 3, ref code, .. } if code == "TransportError"));
}

#[test]
fn next_word_is_never_an_expanded_one() {
    let asked = Arc::new(Mutex::new(Vec::new()));
    let log = asked.clone();
    let lexicon = SyntheticLexicon { size: 300, ..Default::default() };
    let mock = MockBackend::new()
        .generator(SUGGEST_RELATED, move |r| {
            let w = r.variables["word"].clone();
            log.lock().unwrap().push(w.clone());
            reply_words(&lexicon.related("es", &w), "es")
        })
        .generator(DESCRIBE_WORD, |_| MockReply::text("x"));
    let mut config = ExpansionRunConfig::new(es(), "es00000", 400, 9);
    config.describe = false;
    let run = run_expansion_experiment(&config, &gateway(mock)).unwrap();
    let asked = asked.lock().unwrap();
    let unique: HashSet<&String> = asked.iter().collect();
    assert_eq!(unique.len(), asked.len(), "a word was expanded twice");
    // A closed universe of 301 words is used up before 400 iterations.
    assert!(matches!(run.outcome, RunOutcome::Exhausted { .. }));
    assert_eq!(run.vocabulary.unused_for_expansion().len(), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn growth_is_monotone_bounded_and_duplicate_free(
        seed in any::<u64>(),
        size in 20usize..400,
        fanout in 1usize..12,
        iterations in 1u32..80,
    ) {
        let lexicon = SyntheticLexicon { size, fanout, ..Default::default() };
        let gw = gateway(lexicon.mock_backend());
        let mut config = ExpansionRunConfig::new(es(), "arranque", iterations, seed);
        config.describe = iterations % 2 == 0;
        let run = run_expansion_experiment(&config, &gw).unwrap();
        let mut previous = 1;
        for r in &run.records {
            prop_assert!(r.vocab_size >= previous);
            prop_assert!(r.vocab_size <= 1 + config.max_candidates * r.iteration as usize);
            previous = r.vocab_size;
        }
        let keys: Vec<(String, LanguageCode)> = run
            .vocabulary
            .nodes()
            .map(|n| (normalize_word(&n.word), n.language.clone()))
            .collect();
        let unique: HashSet<_> = keys.iter().collect();
        prop_assert_eq!(unique.len(), keys.len());
    }
}

fn suite_config(iterations: u32) -> SuiteConfig {
    SuiteConfig {
        languages: ["es", "ko", "ja"].map(|l| LanguageCode::new(l).unwrap()).to_vec(),
        starts_per_language: 10,
        iterations,
        seed: 42,
        max_candidates: 10,
        describe: true,
    }
}

fn lexicon_pools(lexicon: &SyntheticLexicon, langs: &[LanguageCode]) -> BTreeMap<LanguageCode, Vec<String>> {
    langs.iter().map(|l| (l.clone(), lexicon.words(l.as_str()))).collect()
}

#[test]
fn suite_shape_and_determinism() {
    let lexicon = SyntheticLexicon { size: 1000, ..Default::default() };
    let config = suite_config(5);
    let pools = lexicon_pools(&lexicon, &config.languages);
    let gw = gateway(lexicon.mock_backend());

    let a = run_experiment_suite(&config, &pools, &gw).unwrap();
    assert_eq!(a.runs.len(), 30);
    assert_eq!(a.rows.len(), 150);
    let ids: Vec<&str> = a.runs.iter().map(|r| r.run_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(ids[0], "es-00");
    for lang in ["es", "ja", "ko"] {
        let starts: HashSet<&str> = a
            .runs
            .iter()
            .filter(|r| r.language == lang)
            .map(|r| r.start_word.as_str())
            .collect();
        assert_eq!(starts.len(), 10);
    }

    let mut first = Vec::new();
    write_growth_csv(&a.rows, &mut first).unwrap();
    let b = run_experiment_suite(&config, &pools, &gateway(lexicon.mock_backend())).unwrap();
    let mut second = Vec::new();
    write_growth_csv(&b.rows, &mut second).unwrap();
    assert_eq!(first, second);
    let header = String::from_utf8(first).unwrap();
    assert!(header.starts_with("run_id,language,start_word,iteration,vocab_size\n"));

    let other_seed = SuiteConfig { seed: 43, ..config };
    let c = run_experiment_suite(&other_seed, &pools, &gw).unwrap();
    assert_ne!(a.rows, c.rows);
}

#[test]
fn too_small_pool_is_rejected() {
    let config = suite_config(3);
    let pools: BTreeMap<_, _> = config
        .languages
        .iter()
        .map(|l| (l.clone(), vec!["a".to_string(), "A".to_string()]))
        .collect();
    let gw = gateway(fresh_words_mock());
    assert!(matches!(run_experiment_suite(&config, &pools, &gw), Err(EvalError::InvalidConfig(_))));
}

#[test]
fn summary_statistics() {
    // Sample standard deviation of 2,4,4,4,5,5,7,9 is sqrt(32/7).
    let (mean, std) = mean_and_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
    assert_eq!(mean, 5.0);
    assert!((std - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    assert_eq!(mean_and_std(&[3.0]), (3.0, 0.0));

    let lexicon = SyntheticLexicon { size: 500, ..Default::default() };
    let config = SuiteConfig { starts_per_language: 4, ..suite_config(6) };
    let pools = lexicon_pools(&lexicon, &config.languages);
    let suite = run_experiment_suite(&config, &pools, &gateway(lexicon.mock_backend())).unwrap();
    let summary = summarize(&suite.runs);
    assert_eq!(summary.len(), 4);
    assert_eq!(summary[3].language, "all");
    assert_eq!(summary[3].runs, 12);
    for s in &summary[..3] {
        let finals: Vec<f64> = suite
            .runs
            .iter()
            .filter(|r| r.language == s.language)
            .map(|r| r.final_size as f64)
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        assert!((s.mean_final - mean).abs() < 1e-9);
    }
}

fn row(run: &str, t: u32, size: usize) -> GrowthRow {
    GrowthRow {
        run_id: run.into(),
        language: "es".into(),
        start_word: "x".into(),
        iteration: t,
        vocab_size: size,
    }
}

#[test]
fn plot_tables() {
    let rows = vec![
        row("es-00", 1, 11),
        row("es-00", 2, 21),
        row("es-00", 3, 30),
        row("es-01", 1, 8),
        // es-01 stopped after iteration 1.
    ];
    let tables = curve_tables(&rows, 10);
    assert_eq!(tables.len(), 1);
    let t = &tables[0];
    assert_eq!(t.run_ids, ["es-00", "es-01"]);
    let got: Vec<(u32, Vec<usize>, f64, u64)> = t
        .rows
        .iter()
        .map(|r| (r.iteration, r.values.clone(), r.mean, r.upper_bound))
        .collect();
    assert_eq!(
        got,
        vec![
            (0, vec![1, 1], 1.0, 1),
            (1, vec![11, 8], 9.5, 11),
            (2, vec![21, 8], 14.5, 21),
            (3, vec![30, 8], 19.0, 31),
        ]
    );

    let long: Vec<GrowthRow> = (1..=500).map(|t| row("es-00", t, 1 + 3 * t as usize)).collect();
    let table = &curve_tables(&long, 10)[0];
    let last = table.rows.last().unwrap();
    assert_eq!(last.upper_bound, 5001);
    assert!(table.rows.iter().all(|r| r.mean == r.values[0] as f64));

    let dir = tempfile::tempdir().unwrap();
    let files = emit_plot_data(&rows, 10, dir.path()).unwrap();
    let text = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(
        text,
        "iteration,es-00,es-01,mean,upper_bound\n0,1,1,1,1\n1,11,8,9.5,11\n2,21,8,14.5,21\n3,30,8,19,31\n"
    );
    assert!(emit_plot_data(&[], 10, dir.path()).is_err());
}

fn vocab(words: usize) -> BTreeMap<LanguageCode, Vec<WordNode>> {
    let mut out = BTreeMap::new();
    for lang in ["es", "ko"] {
        let code = LanguageCode::new(lang).unwrap();
        let mut store = GraphStore::new();
        for i in 0..words {
            store.add_node(&format!("{lang}{i}"), code.clone(), "", BTreeSet::new()).unwrap();
        }
        out.insert(code, store.nodes().cloned().collect());
    }
    out
}

#[test]
fn always_correct_judge_gives_full_marks() {
    let lexicon = SyntheticLexicon::default();
    let judge = gateway(MockBackend::new().generator(JUDGE_QA, |_| {
        MockReply::text(r#"{"verdict": "correct", "rationale": "fine"}"#)
    }));
    let config = QuizEvalConfig { n_per_type: 5, seed: 1, regeneration_rounds: 1 };
    let report = run_quiz_eval(&config, &vocab(20), &gateway(lexicon.mock_backend()), &judge).unwrap();
    assert_eq!(report.verdicts.len(), 20);
    assert_eq!(report.rows.len(), 4);
    for r in &report.rows {
        assert_eq!((r.judged, r.correct, r.pct_correct), (5, 5, Some(100.0)));
    }
}

#[test]
fn unjudged_questions_leave_the_denominator() {
    // Every word is sampled when the vocabulary has exactly n words. The
    // judge rejects words ending in 0 or 1 and garbles words ending in 2.
    let lexicon = SyntheticLexicon::default();
    let judge = gateway(MockBackend::new().generator(JUDGE_QA, |r| {
        let answer = &r.variables["answer"];
        MockReply::text(match answer.chars().last().unwrap() {
            '0' | '1' => r#"{"verdict": "incorrect", "rationale": "no"}"#.to_string(),
            '2' => "I would rather not say.".to_string(),
            _ => r#"{"verdict": "correct", "rationale": "yes"}"#.to_string(),
        })
    }));
    let config = QuizEvalConfig { n_per_type: 8, seed: 5, regeneration_rounds: 0 };
    let report = run_quiz_eval(&config, &vocab(8), &gateway(lexicon.mock_backend()), &judge).unwrap();
    // Per (language, kind): 8 questions, 1 unjudged, 7 judged, 5 correct.
    for r in &report.rows {
        assert_eq!((r.generated, r.judged, r.correct, r.unjudged), (8, 7, 5, 1));
        assert_eq!(r.pct_correct, Some(500.0 / 7.0));
    }
    assert!(report.warnings.iter().any(|w| w.contains("unjudged")));
}
