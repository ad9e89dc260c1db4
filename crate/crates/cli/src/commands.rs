use std::path::Path;
use std::sync::Arc;

use meronym_core::clock::SystemClock;
use meronym_core::corpus::CorpusError;
use meronym_core::ids::{QuestionId, UserId};
use meronym_core::scenario::seed_walkthrough;
use meronym_core::service::PersistedState;
use meronym_core::signals::IdentitySignal;
use meronym_core::{Service, ServiceError};
use meronym_gateway::store::StoreError;
use meronym_gateway::{Gateway, GatewayConfig, GatewayError, Store};
use thiserror::Error;

use crate::CliConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("invalid signal spec: {0}")]
    SignalSpec(String),
    #[error("{0}")]
    Runtime(std::io::Error),
    #[error("store already holds {0} accounts; seed into an empty store")]
    StoreNotEmpty(usize),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Corpus(e) => e.code(),
            CliError::Gateway(e) => e.code(),
            CliError::Store(_) => "StoreUnavailable",
            CliError::Service(e) => e.code(),
            CliError::SignalSpec(_) => "InvalidSignalSpec",
            CliError::Runtime(_) => "RuntimeError",
            CliError::StoreNotEmpty(_) => "StoreNotEmpty",
        }
    }
}

type Lines = Result<Vec<String>, CliError>;

fn gateway_config(config: &CliConfig) -> GatewayConfig {
    GatewayConfig {
        corpus: config.corpus(),
        store_dir: config.store.clone(),
        bind: config.bind.clone(),
        admin_token: config.admin_token.clone().unwrap_or_default(),
        service: config.service(),
    }
}

fn open(config: &CliConfig) -> Result<Gateway, CliError> {
    Ok(Gateway::open(&gateway_config(config), Arc::new(SystemClock))?)
}

pub fn ingest(config: &CliConfig) -> Lines {
    let snapshot = config.corpus().load()?;
    Ok(vec![snapshot.summary().to_string()])
}

pub fn serve(config: &CliConfig) -> Lines {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("MERONYM_LOG").unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let gateway_config = gateway_config(config);
    if gateway_config.admin_token.is_empty() {
        eprintln!("warning: no admin token set; admin routes are disabled");
    }
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::Runtime)?;
    runtime.block_on(meronym_gateway::serve(gateway_config, meronym_gateway::shutdown_signal()))?;
    Ok(vec!["stopped".to_owned()])
}

fn parse_signals(specs: &[String], file: Option<&Path>) -> Result<Vec<IdentitySignal>, CliError> {
    let mut signals = Vec::new();
    for spec in specs {
        signals.push(serde_json::from_str(spec).map_err(|e| CliError::SignalSpec(format!("{spec}: {e}")))?);
    }
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::SignalSpec(format!("{}: {e}", path.display())))?;
        let list: Vec<IdentitySignal> = serde_json::from_str(&text)
            .map_err(|e| CliError::SignalSpec(format!("{}: {e}", path.display())))?;
        signals.extend(list);
    }
    Ok(signals)
}

/// The stored state, or a fresh one when nothing has been saved yet.
fn read_store(config: &CliConfig) -> Result<PersistedState, CliError> {
    let store = Store::open(&config.store)?;
    if !store.state_path().exists() {
        return Ok(PersistedState::default());
    }
    Ok(store.load()?.unwrap_or_default())
}

pub fn audit(config: &CliConfig, specs: &[String], file: Option<&Path>, question: Option<&str>) -> Lines {
    let snapshot = config.corpus().load()?;
    let persisted = if question.is_some() || config.store.join("state.json").exists() {
        read_store(config)?
    } else {
        PersistedState::default()
    };
    let service = Service::restore(config.service(), snapshot, Arc::new(SystemClock), persisted);
    let signals = match question {
        Some(id) => service.question(&QuestionId::new(id))?.meronym.signals().to_vec(),
        None => parse_signals(specs, file)?,
    };
    Ok(service.audit_raw(&signals)?.lines())
}

pub fn approve_claim(config: &CliConfig, user_id: &str) -> Lines {
    let gateway = open(config)?;
    let account = gateway.service().approve_claim(&UserId::new(user_id))?;
    gateway.shutdown()?;
    let author = account.claimed_author_id.map(|a| a.to_string()).unwrap_or_default();
    Ok(vec![format!("approved: {} -> {}", account.user_id, author)])
}

pub fn trace(config: &CliConfig, platform: &str, post_id: &str) -> Lines {
    let service = Service::restore(config.service(), config.corpus().load()?, Arc::new(SystemClock), read_store(config)?);
    let t = service.trace_post(platform, post_id)?;
    let or_none = |v: Option<String>| v.unwrap_or_else(|| "none".to_owned());
    Ok(vec![
        format!("post: {}/{}", t.platform, t.post_id),
        format!("origin: {:?}", t.origin),
        format!("source: {}", t.source_id),
        format!("author: {}", t.author),
        format!("endorsement: {}", or_none(t.endorsement_id.map(|e| e.to_string()))),
        format!("endorser: {}", or_none(t.endorser.map(|e| e.to_string()))),
        format!("endorser author: {}", or_none(t.endorser_author_id.map(|e| e.to_string()))),
    ])
}

pub fn seed(config: &CliConfig, scenario: &str) -> Lines {
    let gateway = open(config)?;
    let service = gateway.service();
    let existing = service.accounts().len();
    if existing > 0 {
        return Err(CliError::StoreNotEmpty(existing));
    }
    let w = seed_walkthrough(service)?;
    gateway.shutdown()?;
    let mut lines = vec![
        format!("seeded: {scenario}"),
        format!("alice: {}", w.alice),
        format!("mark: {}", w.mark),
        format!("matt: {}", w.matt),
        format!("endorsement: {}", w.endorsement.endorsement_id),
        format!("question: {}", w.question_id()),
        format!("answer: {}", w.answer_id()),
    ];
    for platform in service.platforms() {
        let posts = service.platform_posts(&platform)?.len();
        lines.push(format!("posts on {platform}: {posts}"));
    }
    Ok(lines)
}
