use std::path::PathBuf;

use clap::Parser;
use diymkg_core::llm::{LlmBackendConfig, Provider, ENV_SAFE_MODE};
use diymkg_server::{build_state, serve, ServerConfig, StartError};
use tracing_subscriber::EnvFilter;

/// Serve a DIY-MKG data directory over HTTP.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Directory holding graph.json, snapshots/, quizzes/ and prompts/.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Run every suggestion batch through the appropriateness filter
    /// (also enabled by DIYMKG_SAFE_MODE=1).
    #[arg(long)]
    safe_mode: bool,
    /// Prompt template overrides (default: <data-dir>/prompts).
    #[arg(long)]
    prompts_dir: Option<PathBuf>,
    /// Use the scripted mock backend with this script instead of a real model.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Use the mock backend with no script (every model call fails).
    #[arg(long, conflicts_with = "mock_script")]
    mock: bool,
    /// Chat-completions base URL (overrides DIYMKG_LLM_BASE_URL).
    #[arg(long)]
    llm_base_url: Option<String>,
    /// Model name (overrides DIYMKG_LLM_MODEL).
    #[arg(long)]
    llm_model: Option<String>,
    #[arg(long)]
    llm_timeout_secs: Option<f64>,
    #[arg(long)]
    llm_max_retries: Option<u32>,
}

fn llm_config(args: &Args) -> Result<LlmBackendConfig, StartError> {
    if args.mock || args.mock_script.is_some() {
        return Ok(LlmBackendConfig {
            mock_script: args.mock_script.clone(),
            ..LlmBackendConfig::mock()
        });
    }
    let mut config = LlmBackendConfig::from_env()?;
    config.provider = Provider::OpenAiCompatible;
    if let Some(url) = &args.llm_base_url {
        config.base_url = url.clone();
    }
    if let Some(model) = &args.llm_model {
        config.model_name = model.clone();
    }
    if let Some(t) = args.llm_timeout_secs {
        config.timeout_secs = t;
    }
    if let Some(r) = args.llm_max_retries {
        config.max_retries = r;
    }
    config.validate()?;
    Ok(config)
}

async fn run(args: Args) -> Result<(), StartError> {
    let config = ServerConfig {
        llm: llm_config(&args)?,
        data_dir: args.data_dir,
        host: args.host,
        port: args.port,
        safe_mode: args.safe_mode
            || std::env::var(ENV_SAFE_MODE).is_ok_and(|v| matches!(v.trim(), "1" | "true")),
        prompts_dir: args.prompts_dir,
    };
    let state = build_state(&config)?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| StartError::Bind { addr: addr.clone(), source })?;
    let local = listener
        .local_addr()
        .map_err(|source| StartError::Bind { addr, source })?;
    // Scripts wait for this line to learn the port.
    println!("listening on http://{local}");
    tracing::info!(data_dir = %config.data_dir.display(), "serving");
    serve(listener, state).await.map_err(|source| StartError::Bind {
        addr: local.to_string(),
        source,
    })
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Args::parse()).await {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
