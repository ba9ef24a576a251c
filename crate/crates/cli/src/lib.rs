//! `taforge` command line. Every command that changes a workspace goes
//! through the same apply-then-commit path the service uses.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, NaiveDate};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use taforge_api::edits::{self, EditTarget};
use taforge_api::ServiceConfig;
use taforge_core::context::DocumentKind;
use taforge_core::ingest::CorpusFilter;
use taforge_core::llm::{Gateway, MockScript, ProviderConfig};
use taforge_core::metrics::{evaluate_json, EvalKind, PrfMode, DEFAULT_TAU};
use taforge_core::pipeline::{CreateSpec, Mutation, Organization, Phase, Source, Workspace};
use taforge_core::report::{build_report, export_csv};
use taforge_core::store::{read_audit, WorkspaceDir};
use taforge_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "taforge", version, about = "LLM-assisted thematic analysis workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct WorkspaceArg {
    /// Workspace directory.
    #[arg(long, short = 'w')]
    pub workspace: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a workspace from an NDJSON dump or plain text files.
    Ingest {
        /// NDJSON dump (optionally .zst), or text files with --text-files.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, required_unless_present = "text_files")]
        subreddit: Option<String>,
        /// Treat every input as one transcript.
        #[arg(long)]
        text_files: bool,
        /// Inclusive, ISO 8601 date or date-time.
        #[arg(long)]
        from: Option<String>,
        /// Exclusive, ISO 8601 date or date-time.
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        keyword: Option<String>,
        #[arg(long)]
        drop_empty: bool,
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Add a research question, document or note.
    Context {
        #[arg(long, default_value = "uploaded_document")]
        kind: String,
        #[arg(long, conflicts_with = "file", required_unless_present = "file")]
        text: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Run the machine step of a phase (1 to 6).
    Run {
        phase: u8,
        /// concepts|outline for phase 1; initial|codebook|global for phase 3.
        #[arg(long)]
        step: Option<String>,
        #[arg(long)]
        sample_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        organization: Option<String>,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Regenerate clusters (4) or themes (5) with feedback.
    Redo {
        phase: u8,
        #[arg(long)]
        feedback: String,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Apply a human edit. The body is the same JSON the PATCH endpoints take.
    Edit {
        /// concepts, outline, codebook, applications, clusters or themes.
        target: String,
        /// e.g. '{"action":"rename","code_id":"code-0001","label":"Cost"}'
        body: String,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Print the phase table.
    Status {
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Print one phase as JSON.
    Show {
        phase: u8,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Compare two label sets, codings or partitions.
    Eval {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value = "set")]
        kind: String,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value = "hard")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the report CSV.
    Export {
        #[arg(long, default_value = "theme-code")]
        organization: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    Snapshot {
        #[arg(long)]
        reason: Option<String>,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    Restore {
        snapshot_id: String,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Rebuild a workspace from an audit log into a new directory.
    Replay {
        #[arg(long)]
        audit: PathBuf,
        #[command(flatten)]
        ws: WorkspaceArg,
    },
    /// Serve the HTTP API. Configured from TAFORGE_* variables.
    Serve {
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
    },
}

/// Parses a bound given as `2022-03-01` or an RFC 3339 date-time, in epoch
/// seconds.
pub fn parse_instant(s: &str) -> Result<i64> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    Err(Error::InvalidFilter(format!("{s:?} is not an ISO 8601 date or date-time")))
}

fn mock_script() -> Result<Option<MockScript>> {
    match std::env::var("TAFORGE_MOCK_SCRIPT") {
        Ok(p) if !p.trim().is_empty() => Ok(Some(MockScript::load(Path::new(&p))?)),
        _ => Ok(None),
    }
}

fn gateway(cfg: &ProviderConfig) -> Result<Gateway> {
    Gateway::from_config(cfg.clone(), mock_script()?)
}

/// Next timestamp for a workspace: wall clock, or with
/// `TAFORGE_CLOCK=logical` one past the last audit entry.
fn next_timestamp(last: Option<i64>) -> i64 {
    let after = last.map_or(1, |t| t + 1);
    if std::env::var("TAFORGE_CLOCK").as_deref() == Ok("logical") {
        return after;
    }
    let wall = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0);
    wall.max(after)
}

fn apply(ws_arg: &WorkspaceArg, m: Mutation) -> Result<Value> {
    let dir = WorkspaceDir::new(&ws_arg.workspace);
    let mut ws = dir.load()?;
    let at = next_timestamp(dir.audit()?.last().map(|e| e.timestamp));
    let gw = gateway(&ws.manifest.config)?;
    let progress = |done: usize, total: usize| {
        if total > 1 {
            eprint!("\r{done}/{total}");
            if done == total {
                eprintln!();
            }
        }
    };
    let outcome = dir.apply(&mut ws, &m, at, &gw, &progress)?;
    Ok(json!({
        "operation": m.operation(),
        "outcome": outcome,
        "stale_phases": ws.data.stale_phases(),
    }))
}

fn phase_table(ws: &Workspace) -> String {
    let mut out = String::new();
    for p in Phase::ALL {
        let s = ws.data.states.get(p);
        let status = if ws.data.is_stale(p) && !s.is_empty() { "stale".to_string() } else { format!("{:?}", s.effective_status()).to_lowercase() };
        out.push_str(&format!("{} {:<12} {:<10}{}\n", p.number(), p.name(), status, if ws.data.is_complete(p) { " complete" } else { "" }));
    }
    out
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs one command, writing its result to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let emit = |out: &mut dyn Write, v: &Value| -> Result<()> {
        writeln!(out, "{}", serde_json::to_string_pretty(v)?).map_err(|e| Error::io("stdout", e))
    };
    match cli.command {
        Command::Ingest { input, subreddit, text_files, from, to, keyword, drop_empty, name, ws } => {
            let filter = CorpusFilter {
                date_from: from.as_deref().map(parse_instant).transpose()?,
                date_to: to.as_deref().map(parse_instant).transpose()?,
                keyword,
                drop_empty,
            };
            let source = if text_files {
                Source::TextFiles { paths: input }
            } else {
                let [path] = <[PathBuf; 1]>::try_from(input)
                    .map_err(|_| Error::InvalidArgument("give exactly one NDJSON input".into()))?;
                Source::Ndjson { path, subreddit: subreddit.unwrap_or_default() }
            };
            let id = ws
                .workspace
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "workspace".into());
            let spec = CreateSpec {
                name: name.unwrap_or_else(|| id.clone()),
                workspace_id: id,
                source,
                filter,
                config: Some(ProviderConfig::from_env()?),
            };
            let created = Workspace::create(&spec, next_timestamp(None))?;
            WorkspaceDir::new(&ws.workspace).initialize(&created, &spec)?;
            emit(out, &json!({
                "workspace": ws.workspace,
                "transcripts": created.corpus.len(),
                "stats": created.corpus.stats,
            }))
        }
        Command::Context { kind, text, file, ws } => {
            let kind: DocumentKind = serde_json::from_value(json!(kind))
                .map_err(|_| Error::InvalidArgument(format!("unknown context kind {kind:?}")))?;
            let text = match (text, file) {
                (Some(t), _) => t,
                (None, Some(f)) => std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?,
                (None, None) => unreachable!("clap requires one"),
            };
            emit(out, &apply(&ws, Mutation::AddContext { kind, text })?)
        }
        Command::Run { phase, step, sample_size, seed, organization, ws } => {
            let m = match Mutation::run(Phase::from_number(phase)?, step.as_deref())? {
                Mutation::LoadData { filter, .. } => Mutation::LoadData { sample_size, seed, filter },
                Mutation::BuildReport { .. } => Mutation::BuildReport {
                    organization: organization.as_deref().map(str::parse).transpose()?.unwrap_or_default(),
                },
                other => other,
            };
            emit(out, &apply(&ws, m)?)
        }
        Command::Redo { phase, feedback, ws } => emit(out, &apply(&ws, Mutation::redo(Phase::from_number(phase)?, feedback)?)?),
        Command::Edit { target, body, ws } => {
            let target: EditTarget = target.parse()?;
            let m = edits::mutation(target, serde_json::from_str(&body)?)?;
            emit(out, &apply(&ws, m)?)
        }
        Command::Status { ws } => {
            let w = WorkspaceDir::new(&ws.workspace).load()?;
            write!(out, "{}", phase_table(&w)).map_err(|e| Error::io("stdout", e))
        }
        Command::Show { phase, ws } => {
            let w = WorkspaceDir::new(&ws.workspace).load()?;
            emit(out, &w.data.phase_file(Phase::from_number(phase)?)?)
        }
        Command::Eval { predicted, reference, kind, tau, mode, out: dest } => {
            let kind: EvalKind = kind.parse()?;
            let mode: PrfMode = mode.parse()?;
            let gw = gateway(&ProviderConfig::from_env()?)?;
            let report = evaluate_json(kind, &read_json(&predicted)?, &read_json(&reference)?, tau, mode, gw.embedder())?;
            let v = serde_json::to_value(&report)?;
            match dest {
                Some(p) => {
                    taforge_core::store::write_atomic(&p, (serde_json::to_string_pretty(&v)? + "\n").as_bytes())?;
                    emit(out, &json!({ "out": p, "headline": report.headline() }))
                }
                None => emit(out, &v),
            }
        }
        Command::Export { organization, out: dest, ws } => {
            let org: Organization = organization.parse()?;
            let w = WorkspaceDir::new(&ws.workspace).load()?;
            let rows = build_report(&w, org)?;
            export_csv(&rows, &dest)?;
            emit(out, &json!({ "out": dest, "rows": rows.len() }))
        }
        Command::Snapshot { reason, ws } => emit(out, &apply(&ws, Mutation::Snapshot { reason })?),
        Command::Restore { snapshot_id, ws } => emit(out, &apply(&ws, Mutation::Restore { snapshot_id })?),
        Command::Replay { audit, ws } => {
            let entries = read_audit(&audit)?;
            let cfg = match entries.first().map(|e| &e.record) {
                Some(taforge_core::store::AuditRecord::Create { spec }) => spec.config.clone().unwrap_or_else(ProviderConfig::mock),
                _ => ProviderConfig::mock(),
            };
            let w = WorkspaceDir::new(&ws.workspace).replay_from(&entries, &gateway(&cfg)?)?;
            emit(out, &json!({ "workspace": ws.workspace, "seq": w.manifest.seq, "stale_phases": w.data.stale_phases() }))
        }
        Command::Serve { data_dir, port } => {
            let mut cfg = ServiceConfig::from_env()?;
            if let Some(d) = data_dir {
                cfg.data_dir = d;
            }
            if let Some(p) = port {
                cfg.bind.set_port(p);
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
            rt.block_on(taforge_api::serve(cfg))
        }
    }
}
