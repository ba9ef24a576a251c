//! Acceptance checks. Each prints one PASS or FAIL line; the binary exits
//! non-zero when any check fails.

mod durability;
mod e2e;
mod gate;
mod ingest;
mod metrics;
mod partitions;
mod propagation;
mod quotes;
mod server;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use taforge_core::llm::{Gateway, MockScript};
use taforge_core::pipeline::{no_progress, CreateSpec, Mutation, Source, Workspace};

/// A check returns a one-line summary on success and the reason on failure.
pub type Outcome = Result<String, String>;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_script() -> MockScript {
    MockScript::load(&fixtures().join("mock_script.json")).expect("fixture script")
}

pub fn fixture_dump() -> String {
    std::fs::read_to_string(fixtures().join("corpus.ndjson")).expect("fixture corpus")
}

pub fn fixture_spec(id: &str) -> CreateSpec {
    CreateSpec {
        workspace_id: id.into(),
        name: id.into(),
        source: Source::InlineNdjson {
            text: fixture_dump(),
            subreddit: "HealthAccess".into(),
        },
        filter: Default::default(),
        config: None,
    }
}

/// In-memory workspace over the fixture corpus with `steps` applied.
pub fn fixture_workspace(steps: &[Mutation], gw: &Gateway) -> Result<Workspace, String> {
    let mut ws = Workspace::create(&fixture_spec("fixture"), 1).map_err(|e| e.to_string())?;
    for (i, m) in steps.iter().enumerate() {
        ws.apply(m, i as i64 + 2, gw, &no_progress)
            .map_err(|e| format!("{}: {e}", m.operation()))?;
    }
    Ok(ws)
}

pub fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 8] = [
        ("quote_verification", quotes::run),
        ("hallucination_gate", gate::run),
        ("metric_oracles", metrics::run),
        ("partition_invariants", partitions::run),
        ("propagation", propagation::run),
        ("deterministic_end_to_end", e2e::run),
        ("ingestion_oracle", ingest::run),
        ("durability", durability::run),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        if !wanted.is_empty() && !wanted.iter().any(|w| name.contains(w.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(summary) => println!("PASS {name}: {summary} [{secs:.2} s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason} [{secs:.2} s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
