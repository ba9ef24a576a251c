//! The HTTP request that performs a given mutation.

use serde_json::{json, Value};
use taforge_core::pipeline::Mutation;

#[derive(Debug, Clone, PartialEq)]
pub struct RequestSpec {
    pub method: &'static str,
    pub path: String,
    pub body: Value,
    /// Answered with 202 and a job to poll.
    pub job: bool,
}

pub fn request_for(workspace_id: &str, m: &Mutation) -> RequestSpec {
    use Mutation::*;
    let base = format!("/v1/workspaces/{workspace_id}");
    let run = |n: u8, body: Value| RequestSpec { method: "POST", path: format!("{base}/phases/{n}:run"), body, job: true };
    let patch = |what: &str, body: Value| RequestSpec { method: "PATCH", path: format!("{base}/{what}"), body, job: false };
    let post = |path: String, body: Value, job: bool| RequestSpec { method: "POST", path, body, job };
    match m {
        AddContext { kind, text } => post(format!("{base}/context"), json!({ "kind": kind, "text": text }), false),
        GenerateConcepts => run(1, json!({})),
        GenerateOutline => run(1, json!({ "step": "outline" })),
        SelectConcepts { concept_ids } => patch("concepts", json!({ "action": "select", "concept_ids": concept_ids })),
        EditConcepts { edit } => patch("concepts", json!(edit)),
        EditOutline { concept_id, definition } => patch("outline", json!({ "concept_id": concept_id, "definition": definition })),
        LoadData { sample_size, seed, filter } => run(2, json!({ "sample_size": sample_size, "seed": seed, "filter": filter })),
        InitialCoding => run(3, json!({ "step": "initial" })),
        DeriveCodebook => run(3, json!({ "step": "codebook" })),
        GlobalCoding => run(3, json!({ "step": "global" })),
        EditCodebook { edit } => patch("codebook", json!(edit)),
        EditApplication { edit } => patch("applications", json!(edit)),
        ClusterCodes => run(4, json!({})),
        EditClusters { edit } => patch("clusters", json!(edit)),
        RedoClusters { feedback } => post(format!("{base}/phases/4:redo"), json!({ "feedback": feedback }), true),
        GenerateThemes => run(5, json!({})),
        EditThemes { edit } => patch("themes", json!(edit)),
        RedoThemes { feedback } => post(format!("{base}/phases/5:redo"), json!({ "feedback": feedback }), true),
        BuildReport { organization } => run(6, json!({ "organization": organization })),
        Snapshot { reason } => post(format!("{base}/snapshots"), json!({ "reason": reason }), false),
        Restore { snapshot_id } => post(format!("{base}/snapshots/{snapshot_id}:restore"), json!({}), false),
    }
}
