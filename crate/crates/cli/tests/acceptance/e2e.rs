//! Full six-phase run over HTTP against a real server process.

use std::time::Instant;

use taforge_core::demo::full_run;
use taforge_core::llm::Gateway;
use taforge_core::pipeline::Organization;
use taforge_core::report::{build_report, to_csv_bytes};
use taforge_core::store::WorkspaceDir;

use crate::server::Server;
use crate::{ensure, fixture_script, fixture_workspace, fixtures, Outcome};

const LIMIT_SECS: f64 = 10.0;

/// Runs the demo plan on a fresh service; returns the CSV, the elapsed
/// seconds and the persisted files.
fn one_run(dir: &std::path::Path) -> Result<(Vec<u8>, f64, std::collections::BTreeMap<String, Vec<u8>>), String> {
    let server = Server::start(dir)?;
    let start = Instant::now();
    server.create_fixture("golden")?;
    for m in full_run(10, 42) {
        server.drive("golden", &m)?;
    }
    let report = server.get("/v1/workspaces/golden/report")?;
    let secs = start.elapsed().as_secs_f64();
    ensure(report.status == 200, || format!("report answered {}", report.status))?;
    drop(server);
    let files = WorkspaceDir::new(dir.join("golden")).serialization().map_err(|e| e.to_string())?;
    Ok((report.bytes, secs, files))
}

pub fn run() -> Outcome {
    let golden = std::fs::read(fixtures().join("golden_report.csv")).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (csv_a, secs_a, files_a) = one_run(&tmp.path().join("a"))?;
    let (csv_b, secs_b, files_b) = one_run(&tmp.path().join("b"))?;
    ensure(secs_a < LIMIT_SECS && secs_b < LIMIT_SECS, || format!("runs took {secs_a:.2} s and {secs_b:.2} s"))?;
    ensure(csv_a == golden, || "CSV differs from the golden file".into())?;
    ensure(csv_b == golden, || "second CSV differs from the golden file".into())?;
    if files_a != files_b {
        let differing: Vec<_> = files_a
            .keys()
            .chain(files_b.keys())
            .filter(|k| files_a.get(*k) != files_b.get(*k))
            .collect();
        return Err(format!("workspace serializations differ in {differing:?}"));
    }

    // The library path, twice, must agree with itself and with the service.
    let gw = Gateway::mock(fixture_script());
    let one = fixture_workspace(&full_run(10, 42), &gw)?;
    let two = fixture_workspace(&full_run(10, 42), &Gateway::mock(fixture_script()))?;
    ensure(one.data == two.data, || "in-memory runs diverge".into())?;
    let csv = to_csv_bytes(&build_report(&one, Organization::ThemeAndCode).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(csv == golden, || "in-memory CSV differs from the golden file".into())?;

    Ok(format!(
        "CSV byte-identical to the golden file ({} bytes); runs took {secs_a:.2} s and {secs_b:.2} s (limit {LIMIT_SECS} s); \
         {} persisted files byte-identical across runs",
        golden.len(),
        files_a.len()
    ))
}
