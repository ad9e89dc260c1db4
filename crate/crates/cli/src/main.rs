//! `meronym`: corpus ingestion, the HTTP service, anonymity audits, claim
//! approval, post tracing and demo seeding.
//!
//! Every flag can also be set through an environment variable prefixed with
//! `MERONYM_`, e.g. `MERONYM_STORE` or `MERONYM_K_THRESHOLD`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use meronym_core::corpus::CorpusPaths;
use meronym_core::delivery::PlatformConfig;
use meronym_core::qa::QuotaLimits;
use meronym_core::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "meronym", version, about = "Administer a meronym service")]
struct Cli {
    #[command(flatten)]
    config: CliConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CliConfig {
    #[arg(long, global = true, env = "MERONYM_CORPUS_PUBS", default_value = "fixtures/scholars/publications.jsonl")]
    corpus_pubs: PathBuf,
    #[arg(long, global = true, env = "MERONYM_CORPUS_AUTHORS", default_value = "fixtures/scholars/authors.jsonl")]
    corpus_authors: PathBuf,
    #[arg(long, global = true, env = "MERONYM_CORPUS_FOLLOWS", default_value = "fixtures/scholars/follows.jsonl")]
    corpus_follows: PathBuf,
    /// Directory holding the state document and the journal.
    #[arg(long, global = true, env = "MERONYM_STORE", default_value = "meronym-store")]
    store: PathBuf,
    #[arg(long, global = true, env = "MERONYM_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    /// Bearer token for admin routes. Without it admin routes are disabled.
    #[arg(long, global = true, env = "MERONYM_ADMIN_TOKEN", hide_env_values = true)]
    admin_token: Option<String>,
    #[arg(long, global = true, env = "MERONYM_EXPERT_DAILY_CAP", value_parser = clap::value_parser!(u32).range(1..))]
    expert_daily_cap: Option<u32>,
    #[arg(long, global = true, env = "MERONYM_K_THRESHOLD", value_parser = clap::value_parser!(u64).range(1..))]
    k_threshold: Option<u64>,
    #[arg(long, global = true, env = "MERONYM_CHAR_LIMIT_TWITTER", value_parser = clap::value_parser!(u64).range(1..))]
    char_limit_twitter: Option<u64>,
    #[arg(long, global = true, env = "MERONYM_CHAR_LIMIT_MASTODON", value_parser = clap::value_parser!(u64).range(1..))]
    char_limit_mastodon: Option<u64>,
}

impl CliConfig {
    fn corpus(&self) -> CorpusPaths {
        CorpusPaths {
            publications: self.corpus_pubs.clone(),
            authors: self.corpus_authors.clone(),
            follows: self.corpus_follows.clone(),
        }
    }

    fn service(&self) -> ServiceConfig {
        let defaults = ServiceConfig::default();
        let platforms = defaults
            .platforms
            .iter()
            .map(|p| {
                let limit = match p.name.as_str() {
                    "twitter" => self.char_limit_twitter,
                    "mastodon" => self.char_limit_mastodon,
                    _ => None,
                };
                PlatformConfig {
                    char_limit: limit.map_or(p.char_limit, |l| l as usize),
                    ..p.clone()
                }
            })
            .collect();
        ServiceConfig {
            k_threshold: self.k_threshold.map_or(defaults.k_threshold, |k| k as usize),
            quota: QuotaLimits {
                expert_daily_cap: self.expert_daily_cap.unwrap_or(defaults.quota.expert_daily_cap),
                ..defaults.quota
            },
            platforms,
            ..defaults
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the corpus and print its size.
    Ingest,
    /// Run the HTTP API until interrupted.
    Serve,
    /// Print per-predicate match counts, k and the verdict for a meronym.
    Audit {
        /// One identity signal as JSON; repeatable.
        #[arg(long = "signal")]
        signals: Vec<String>,
        /// File holding a JSON array of identity signals.
        #[arg(long)]
        signals_file: Option<PathBuf>,
        /// Audit the public meronym of a stored question.
        #[arg(long, conflicts_with_all = ["signals", "signals_file"])]
        question: Option<String>,
    },
    /// Approve a user's pending author-profile claim.
    ApproveClaim { user_id: String },
    /// Show which account, and which endorser, stands behind a broadcast post.
    Trace { platform: String, post_id: String },
    /// Load a named demo scenario into an empty store.
    Seed {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(meronym_core::scenario::SEED_NAMES))]
        scenario: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest => commands::ingest(&cli.config),
        Command::Serve => commands::serve(&cli.config),
        Command::Audit {
            signals,
            signals_file,
            question,
        } => commands::audit(&cli.config, &signals, signals_file.as_deref(), question.as_deref()),
        Command::ApproveClaim { user_id } => commands::approve_claim(&cli.config, &user_id),
        Command::Trace { platform, post_id } => commands::trace(&cli.config, &platform, &post_id),
        Command::Seed { scenario } => commands::seed(&cli.config, &scenario),
    };
    match outcome {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
