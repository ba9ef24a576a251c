//! SIGKILL after every acknowledged mutation, then restart and compare;
//! finally replay the audit log onto a fresh service.

use serde_json::{json, Value};
use taforge_core::demo::full_run;
use taforge_core::pipeline::{BucketEdit, CodebookEdit, Mutation};
use taforge_core::store::{read_audit, AuditRecord, WorkspaceDir};

use crate::server::Server;
use crate::{ensure, Outcome};

const WS: &str = "durable";

/// Everything a client can read about the workspace.
fn observe(s: &Server) -> Result<Value, String> {
    let mut out = serde_json::Map::new();
    let mut paths = vec![
        format!("/v1/workspaces/{WS}"),
        format!("/v1/workspaces/{WS}/audit"),
        format!("/v1/workspaces/{WS}/snapshots"),
        format!("/v1/workspaces/{WS}/context"),
        format!("/v1/workspaces/{WS}/transcripts?limit=100"),
    ];
    paths.extend((1..=6).map(|p| format!("/v1/workspaces/{WS}/phases/{p}")));
    for p in paths {
        let r = s.get(&p)?;
        out.insert(p, json!({ "status": r.status, "body": r.json() }));
    }
    Ok(Value::Object(out))
}

/// Kills the server, checks the files on disk, restarts it and compares
/// what it serves with what it served before the kill.
fn crash_and_recover(server: &mut Server, seq: u64) -> Result<(), String> {
    let before = observe(server)?;
    server.kill();
    let dir = WorkspaceDir::new(server.data_dir.join(WS));
    let ws = dir.load().map_err(|e| format!("load after kill at seq {seq}: {e}"))?;
    ws.check_invariants().map_err(|e| format!("invariants after kill at seq {seq}: {e}"))?;
    ensure(ws.manifest.seq == seq, || format!("on disk seq {} but {seq} acknowledged", ws.manifest.seq))?;
    *server = Server::start(&server.data_dir.clone())?;
    let after = observe(server)?;
    if after != before {
        let changed: Vec<&String> = before
            .as_object()
            .into_iter()
            .flatten()
            .filter(|(k, v)| after.get(k.as_str()) != Some(v))
            .map(|(k, _)| k)
            .collect();
        return Err(format!("state after restart at seq {seq} differs in {changed:?}"));
    }
    Ok(())
}

pub fn run() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("primary");
    let mut server = Server::start(&data)?;
    server.create_fixture(WS)?;
    let mut seq = 0;
    crash_and_recover(&mut server, seq)?;

    let mut plan = full_run(10, 42);
    plan.extend([
        Mutation::Snapshot { reason: Some("before edits".into()) },
        Mutation::EditCodebook { edit: CodebookEdit::Rename { code_id: "code-0001".into(), label: "Renamed".into() } },
        Mutation::EditClusters { edit: BucketEdit::Rename { bucket_id: "rc-001".into(), name: "Renamed cluster".into() } },
        Mutation::ClusterCodes,
    ]);
    let mut restarts = 1;
    for m in &plan {
        server.drive(WS, m)?;
        seq += 1;
        crash_and_recover(&mut server, seq)?;
        restarts += 1;
    }
    let snapshots = server.get(&format!("/v1/workspaces/{WS}/snapshots"))?.json();
    let manual = snapshots["snapshots"]
        .as_array()
        .and_then(|a| a.iter().find(|s| s["reason"] == "before edits"))
        .and_then(|s| s["snapshot_id"].as_str())
        .ok_or("manual snapshot missing")?
        .to_string();
    server.drive(WS, &Mutation::Restore { snapshot_id: manual })?;
    seq += 1;
    crash_and_recover(&mut server, seq)?;
    restarts += 1;
    drop(server);

    // Replay the log through the public API of a fresh service.
    let entries = read_audit(&data.join(WS).join("audit.log")).map_err(|e| e.to_string())?;
    let fresh_dir = tmp.path().join("replayed");
    let fresh = Server::start(&fresh_dir)?;
    for e in &entries {
        match &e.record {
            AuditRecord::Create { spec } => {
                fresh.create(&serde_json::to_value(spec).map_err(|e| e.to_string())?)?;
            }
            AuditRecord::Mutation { mutation } => {
                fresh.drive(WS, mutation)?;
            }
        }
    }
    drop(fresh);
    let original = WorkspaceDir::new(data.join(WS)).serialization().map_err(|e| e.to_string())?;
    let replayed = WorkspaceDir::new(fresh_dir.join(WS)).serialization().map_err(|e| e.to_string())?;
    if original != replayed {
        let differing: Vec<_> = original.keys().chain(replayed.keys()).filter(|k| original.get(*k) != replayed.get(*k)).collect();
        return Err(format!("replayed serialization differs in {differing:?}"));
    }
    Ok(format!(
        "{seq} acknowledged mutations, {restarts} kill-and-restart cycles with identical state; \
         replaying {} audit entries reproduced all {} files byte for byte",
        entries.len(),
        original.len()
    ))
}
