use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use diymkg_core::graph::{load_graph, GraphStore, LanguageCode, WordNode};
use diymkg_core::llm::{LlmBackendConfig, LlmGateway, PromptLibrary, Provider};
use diymkg_eval::{
    emit_plot_data, run_experiment_suite, run_quiz_eval, summarize, write_growth_csv,
    write_summary_csv, write_table_csv, write_verdicts_csv, EvalError, QuizEvalConfig,
    RunOutcome, SuiteConfig, SyntheticLexicon,
};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(version, about = "Vocabulary-growth and quiz-correctness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterative expansion runs; writes a tidy growth CSV and a summary.
    Expand(ExpandArgs),
    /// Generate quiz questions and have a judge model rate them.
    Quiz(QuizArgs),
}

#[derive(Args, Clone)]
struct Backend {
    /// Call a real chat-completions endpoint instead of the offline lexicon.
    #[arg(long)]
    live: bool,
    /// Endpoint base URL (default: DIYMKG_LLM_BASE_URL or a local server).
    #[arg(long)]
    base_url: Option<String>,
    /// Model name (default: DIYMKG_LLM_MODEL).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    timeout_secs: Option<f64>,
    #[arg(long)]
    max_retries: Option<u32>,
    /// Prompt template overrides.
    #[arg(long)]
    prompts_dir: Option<PathBuf>,
    /// Words per language in the offline lexicon.
    #[arg(long, default_value_t = 4000)]
    lexicon_size: usize,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    languages: Vec<String>,
    /// Start-word list per language, one word per line; `<lang>` or
    /// `{lang}` in the path is replaced by the language code. Offline runs
    /// default to the lexicon's own words.
    #[arg(long)]
    starts: Option<String>,
    #[arg(long, default_value_t = 10)]
    starts_per_language: usize,
    #[arg(long, default_value_t = 500)]
    iterations: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_candidates: usize,
    /// Skip the per-word description call.
    #[arg(long)]
    no_describe: bool,
    #[arg(long, default_value = "growth.csv")]
    out: PathBuf,
    /// Summary CSV (default: <out>_summary.csv).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Directory for per-language plot CSVs.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
    #[command(flatten)]
    backend: Backend,
}

#[derive(Args)]
struct QuizArgs {
    /// Questions per type per language.
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    languages: Vec<String>,
    /// Model that judges the questions (required with --live).
    #[arg(long)]
    judge_model: Option<String>,
    /// Vocabulary to quiz on; offline runs default to the lexicon.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    regeneration_rounds: u32,
    #[arg(long, default_value = "table.csv")]
    out: PathBuf,
    /// Every verdict with its rationale (default: <out>_verdicts.csv).
    #[arg(long)]
    verdicts: Option<PathBuf>,
    #[command(flatten)]
    backend: Backend,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}_{suffix}.csv"))
}

fn languages(codes: &[String]) -> Result<Vec<LanguageCode>, EvalError> {
    let mut out = Vec::new();
    for c in codes.iter().filter(|c| !c.trim().is_empty()) {
        let code = LanguageCode::new(c)?;
        if !out.contains(&code) {
            out.push(code);
        }
    }
    if out.is_empty() {
        return Err(EvalError::InvalidConfig("no languages given".into()));
    }
    Ok(out)
}

fn prompts(backend: &Backend) -> Result<PromptLibrary, EvalError> {
    Ok(match &backend.prompts_dir {
        Some(dir) => PromptLibrary::builtin_with_overrides(dir)?,
        None => PromptLibrary::builtin(),
    })
}

fn gateway(backend: &Backend, model: Option<&str>, offline_name: &str) -> Result<LlmGateway, EvalError> {
    if !backend.live {
        let lexicon = SyntheticLexicon {
            size: backend.lexicon_size,
            ..SyntheticLexicon::default()
        };
        let config = LlmBackendConfig {
            model_name: model.unwrap_or(offline_name).to_string(),
            ..LlmBackendConfig::mock()
        };
        return Ok(LlmGateway::with_backend(config, prompts(backend)?, Arc::new(lexicon.mock_backend())));
    }
    let mut config = LlmBackendConfig::from_env()?;
    config.provider = Provider::OpenAiCompatible;
    if let Some(url) = &backend.base_url {
        config.base_url = url.clone();
    }
    if let Some(m) = model {
        config.model_name = m.to_string();
    }
    if let Some(t) = backend.timeout_secs {
        config.timeout_secs = t;
    }
    if let Some(r) = backend.max_retries {
        config.max_retries = r;
    }
    Ok(LlmGateway::from_config(config, prompts(backend)?)?)
}

fn read_pool(pattern: &str, language: &LanguageCode) -> Result<Vec<String>, EvalError> {
    let path = pattern
        .replace("<lang>", language.as_str())
        .replace("{lang}", language.as_str());
    let text = std::fs::read_to_string(&path)
        .map_err(|e| EvalError::InvalidConfig(format!("cannot read start words {path}: {e}")))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

fn expand(args: ExpandArgs) -> Result<(), EvalError> {
    let langs = languages(&args.languages)?;
    let mut pools = BTreeMap::new();
    for lang in &langs {
        let pool = match &args.starts {
            Some(pattern) => read_pool(pattern, lang)?,
            None if !args.backend.live => SyntheticLexicon {
                size: args.backend.lexicon_size,
                ..SyntheticLexicon::default()
            }
            .words(lang.as_str()),
            None => return Err(EvalError::InvalidConfig("--starts is required with --live".into())),
        };
        pools.insert(lang.clone(), pool);
    }
    let config = SuiteConfig {
        languages: langs,
        starts_per_language: args.starts_per_language,
        iterations: args.iterations,
        seed: args.seed,
        max_candidates: args.max_candidates,
        describe: !args.no_describe,
    };
    let gw = gateway(&args.backend, args.backend.model.as_deref(), "offline-lexicon")?;
    let result = run_experiment_suite(&config, &pools, &gw)?;

    write_growth_csv(&result.rows, BufWriter::new(File::create(&args.out)?))?;
    let summary = summarize(&result.runs);
    let summary_path = args.summary.unwrap_or_else(|| sibling(&args.out, "summary"));
    write_summary_csv(&summary, BufWriter::new(File::create(&summary_path)?))?;
    if let Some(dir) = &args.plot_dir {
        if !result.rows.is_empty() {
            for path in emit_plot_data(&result.rows, args.max_candidates, dir)? {
                println!("wrote {}", path.display());
            }
        }
    }

    for run in &result.runs {
        match &run.outcome {
            RunOutcome::Completed => {}
            RunOutcome::Exhausted { after } => {
                println!("{}: no unexpanded words left after {after} iterations", run.run_id)
            }
            RunOutcome::Failed { after, code, message } => {
                println!("{}: failed after {after} iterations ({code}): {message}", run.run_id)
            }
        }
    }
    println!("language\truns\tmean_final\tstd_final");
    for s in &summary {
        println!("{}\t{}\t{:.1}\t{:.1}", s.language, s.runs, s.mean_final, s.std_final);
    }
    println!("wrote {} and {}", args.out.display(), summary_path.display());
    Ok(())
}

fn vocabularies(args: &QuizArgs, langs: &[LanguageCode]) -> Result<BTreeMap<LanguageCode, Vec<WordNode>>, EvalError> {
    let mut out = BTreeMap::new();
    match &args.graph {
        Some(path) => {
            let graph = load_graph(path)?;
            for lang in langs {
                let words: Vec<WordNode> = graph.nodes.iter().filter(|n| &n.language == lang).cloned().collect();
                out.insert(lang.clone(), words);
            }
        }
        None if !args.backend.live => {
            let lexicon = SyntheticLexicon {
                size: args.backend.lexicon_size,
                ..SyntheticLexicon::default()
            };
            for lang in langs {
                let mut store = GraphStore::new();
                for w in lexicon.words(lang.as_str()) {
                    store.add_node(&w, lang.clone(), "", BTreeSet::new())?;
                }
                out.insert(lang.clone(), store.nodes().cloned().collect());
            }
        }
        None => return Err(EvalError::InvalidConfig("--graph is required with --live".into())),
    }
    Ok(out)
}

fn quiz(args: QuizArgs) -> Result<(), EvalError> {
    let langs = languages(&args.languages)?;
    if args.backend.live && args.judge_model.is_none() {
        return Err(EvalError::InvalidConfig("--judge-model is required with --live".into()));
    }
    let vocab = vocabularies(&args, &langs)?;
    let generator = gateway(&args.backend, args.backend.model.as_deref(), "offline-lexicon")?;
    let judge = gateway(&args.backend, args.judge_model.as_deref(), "offline-judge")?;
    let config = QuizEvalConfig {
        n_per_type: args.n,
        seed: args.seed,
        regeneration_rounds: args.regeneration_rounds,
    };
    let report = run_quiz_eval(&config, &vocab, &generator, &judge)?;

    write_table_csv(&report.rows, BufWriter::new(File::create(&args.out)?))?;
    let verdicts_path = args.verdicts.unwrap_or_else(|| sibling(&args.out, "verdicts"));
    write_verdicts_csv(&report.verdicts, BufWriter::new(File::create(&verdicts_path)?))?;
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("language\tkind\tjudged\tcorrect\tpct");
    for r in &report.rows {
        let pct = r.pct_correct.map(|p| format!("{p:.1}%")).unwrap_or_else(|| "-".into());
        println!("{}\t{}\t{}\t{}\t{pct}", r.language, r.kind.as_str(), r.judged, r.correct);
    }
    println!("wrote {} and {}", args.out.display(), verdicts_path.display());
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Expand(args) => expand(args),
        Command::Quiz(args) => quiz(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
