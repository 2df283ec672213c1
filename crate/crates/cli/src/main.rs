//! Operator tooling for the homeview dashboard.
//!
//! Plain-text output is derived from the same payloads `--json` prints,
//! which are the service's response bodies.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use homeview_core::batch::persisted_anchors;
use homeview_core::chat::ChatEngine;
use homeview_core::dashboard::{load_config, SummaryLevel};
use homeview_core::fixtures;
use homeview_core::gateway::Gateway;
use homeview_core::provenance::{audit_anchors, AuditReport};
use homeview_core::record::{validate_and_load, ClientRecord, HomeworkType};
use homeview_core::summary::SummaryEngine;
use homeview_core::{RecordError, RecordStore};
use homeview_server::{ApiError, AppState, ErrorBody};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "homeview", version, about = "Operator tooling for the homeview therapist dashboard")]
struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "STORE_PATH", default_value = "homeview-store")]
    store: PathBuf,
    /// Print the JSON payload instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Treat this date as today when windowing (YYYY-MM-DD).
    #[arg(long, global = true)]
    as_of: Option<NaiveDate>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a record document, or every stored record when no file is given.
    Validate { file: Option<PathBuf> },
    /// Load a bundled fixture into the store, replacing any record with its id.
    Seed {
        #[arg(long, default_value = "elias")]
        fixture: String,
    },
    /// Generate a summary with the stored therapist config.
    Summarize {
        client: String,
        /// Overrides the configured level: basic, detailed or none.
        #[arg(long)]
        level: Option<SummaryLevel>,
    },
    /// Answer one question about a client.
    Chat { client: String, question: String },
    /// Check the anchors of a client's persisted summary and answer.
    Audit { client: String },
    /// Run the HTTP service on BIND_ADDR.
    Serve {
        #[arg(long, env = "BIND_ADDR", default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, env = "AUTH_TOKEN", hide_env_values = true)]
        auth_token: Option<String>,
    },
}

/// Output of one command: the JSON payload and its text rendering.
struct Output {
    payload: Value,
    text: String,
}

fn record_report(record: &ClientRecord) -> Value {
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    for entry in record.entries() {
        *kinds.entry(entry.kind().to_string()).or_default() += 1;
    }
    let thought_records =
        record.submissions.iter().filter(|s| s.homework_type == HomeworkType::ThoughtRecord).count();
    json!({
        "record_id": record.record_id,
        "client_label": record.client_label,
        "entry_count": record.entry_count(),
        "kinds": kinds,
        "thought_records": thought_records,
    })
}

fn report_text(report: &Value) -> String {
    let kinds = report["kinds"]
        .as_object()
        .map(|m| m.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join(", "))
        .unwrap_or_default();
    format!(
        "valid: {} ({} entries; {}); thought records: {}",
        report["record_id"].as_str().unwrap_or_default(),
        report["entry_count"],
        kinds,
        report["thought_records"]
    )
}

fn open_store(cli: &Cli) -> Result<Arc<RecordStore>, ApiError> {
    Ok(Arc::new(RecordStore::open(&cli.store)?))
}

fn gateway() -> Result<Arc<Gateway>, ApiError> {
    Ok(Arc::new(Gateway::from_env()?))
}

fn audit_text(report: &AuditReport) -> String {
    let mut out = format!("resolved: {}\ndangling: {}, stale: {}", report.resolved_count, report.dangling.len(), report.stale.len());
    for (label, issues) in [("dangling", &report.dangling), ("stale", &report.stale)] {
        for issue in issues {
            out.push_str(&format!("\n{label} {}/{}", issue.record_id, issue.entry_id));
        }
    }
    out
}

fn run(cli: &Cli) -> Result<Output, ApiError> {
    match &cli.command {
        Command::Validate { file: Some(file) } => {
            let text = std::fs::read_to_string(file).map_err(RecordError::from)?;
            let report = record_report(&validate_and_load(&text)?);
            Ok(Output { text: report_text(&report), payload: report })
        }
        Command::Validate { file: None } => {
            // Opening the store validates every stored document.
            let store = open_store(cli)?;
            let mut reports = Vec::new();
            for id in store.record_ids() {
                reports.push(record_report(&*store.snapshot(&id)?));
            }
            let text = reports.iter().map(report_text).collect::<Vec<_>>().join("\n");
            Ok(Output { text, payload: Value::Array(reports) })
        }
        Command::Seed { fixture } => {
            let record = fixtures::by_name(fixture).ok_or_else(|| {
                ApiError::bad_request("unknown_fixture", format!("no bundled fixture `{fixture}`")).at("fixture")
            })?;
            let store = open_store(cli)?;
            let report = record_report(&record);
            store.put(record)?;
            Ok(Output { text: format!("seeded {}", report_text(&report)), payload: report })
        }
        Command::Summarize { client, level } => {
            let store = open_store(cli)?;
            let mut config = load_config(&store)?;
            if let Some(level) = level {
                config.summary_level = *level;
            }
            let mut engine = SummaryEngine::new(store, gateway()?);
            if let Some(d) = cli.as_of {
                engine = engine.with_as_of(d);
            }
            let summary = engine.generate_summary(client, &config)?;
            Ok(Output { text: summary.render(), payload: serde_json::to_value(&summary).expect("summary serializes") })
        }
        Command::Chat { client, question } => {
            let store = open_store(cli)?;
            let config = load_config(&store)?;
            let mut engine = ChatEngine::new(store, gateway()?);
            if let Some(d) = cli.as_of {
                engine = engine.with_as_of(d);
            }
            let answer = engine.answer(client, question, &config)?;
            Ok(Output { text: answer.text.body.clone(), payload: serde_json::to_value(&answer).expect("answer serializes") })
        }
        Command::Audit { client } => {
            let store = open_store(cli)?;
            store.snapshot(client)?;
            let anchors = persisted_anchors(&store, client)?;
            let report = audit_anchors(&anchors, &store);
            Ok(Output { text: audit_text(&report), payload: serde_json::to_value(&report).expect("report serializes") })
        }
        Command::Serve { bind, auth_token } => {
            tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
                .init();
            let mut state = AppState::new(open_store(cli)?, gateway()?).with_auth_token(auth_token.clone());
            if let Some(d) = cli.as_of {
                state = state.with_as_of(d);
            }
            let runtime = tokio::runtime::Runtime::new().map_err(RecordError::from)?;
            runtime.block_on(homeview_server::serve(state, bind)).map_err(RecordError::from)?;
            Ok(Output { text: String::new(), payload: Value::Null })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(_) if matches!(cli.command, Command::Serve { .. }) => ExitCode::SUCCESS,
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.payload).expect("json value"));
            } else {
                println!("{}", out.text);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let body: ErrorBody = err.body(command_name(&cli.command));
            eprintln!("{}", serde_json::to_string(&body).expect("error body serializes"));
            ExitCode::FAILURE
        }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Validate { .. } => "validate",
        Command::Seed { .. } => "seed",
        Command::Summarize { .. } => "summarize",
        Command::Chat { .. } => "chat",
        Command::Audit { .. } => "audit",
        Command::Serve { .. } => "serve",
    }
}
