//! Hand-maintained OpenAPI description, served at `/v1/openapi.json`.

use serde_json::{json, Map, Value};

use crate::error::MACHINE_CODES;

fn op(summary: &str, ok: u16, body: Option<&str>) -> Value {
    let mut o = json!({
        "summary": summary,
        "responses": {
            ok.to_string(): { "description": "success" },
            "default": {
                "description": "error envelope",
                "content": { "application/json": { "schema": { "$ref": "#/components/schemas/ApiError" } } }
            }
        }
    });
    if let Some(schema) = body {
        o["requestBody"] = json!({
            "required": true,
            "content": { "application/json": { "schema": { "$ref": format!("#/components/schemas/{schema}") } } }
        });
    }
    o
}

pub fn document() -> Value {
    let routes: &[(&str, &str, Value)] = &[
        ("/v1/health", "get", op("liveness", 200, None)),
        ("/v1/workspaces", "get", op("list workspaces", 200, None)),
        ("/v1/workspaces", "post", op("create a workspace and ingest its corpus", 201, Some("CreateWorkspace"))),
        ("/v1/workspaces/{id}", "get", op("workspace summary with phase table", 200, None)),
        ("/v1/workspaces/{id}", "delete", op("delete a workspace", 204, None)),
        ("/v1/workspaces/{id}/transcripts", "get", op("page through transcripts", 200, None)),
        ("/v1/workspaces/{id}/transcripts/{post_id}", "get", op("one transcript and its code applications", 200, None)),
        ("/v1/workspaces/{id}/context", "get", op("context documents", 200, None)),
        ("/v1/workspaces/{id}/context", "post", op("add a context document", 201, Some("ContextDocument"))),
        ("/v1/workspaces/{id}/phases/{n}", "get", op("phase payload and status", 200, None)),
        ("/v1/workspaces/{id}/phases/{n}:run", "post", op("start the machine run for a phase", 202, Some("RunPhase"))),
        ("/v1/workspaces/{id}/phases/{n}:redo", "post", op("regenerate phase 4 or 5 with feedback", 202, Some("Redo"))),
        ("/v1/workspaces/{id}/jobs", "get", op("jobs started on a workspace", 200, None)),
        ("/v1/jobs/{job_id}", "get", op("job status and progress", 200, None)),
        ("/v1/workspaces/{id}/concepts", "patch", op("select, rename, add or delete concepts", 200, Some("Edit"))),
        ("/v1/workspaces/{id}/outline", "patch", op("edit an outline definition", 200, Some("Edit"))),
        ("/v1/workspaces/{id}/codebook", "patch", op("edit the codebook", 200, Some("Edit"))),
        ("/v1/workspaces/{id}/applications", "patch", op("add, edit or delete code applications", 200, Some("Edit"))),
        ("/v1/workspaces/{id}/clusters", "patch", op("edit reviewed-code clusters", 200, Some("Edit"))),
        ("/v1/workspaces/{id}/themes", "patch", op("edit themes", 200, Some("Edit"))),
        ("/v1/workspaces/{id}/report", "get", op("report as CSV", 200, None)),
        ("/v1/workspaces/{id}/snapshots", "get", op("list snapshots", 200, None)),
        ("/v1/workspaces/{id}/snapshots", "post", op("take a snapshot", 201, None)),
        ("/v1/workspaces/{id}/snapshots/{snapshot_id}:restore", "post", op("restore a snapshot", 200, None)),
        ("/v1/workspaces/{id}/eval", "post", op("score machine output of a phase", 200, Some("PhaseEval"))),
        ("/v1/workspaces/{id}/audit", "get", op("audit log", 200, None)),
        ("/v1/eval", "post", op("score two label sets, codings or partitions", 200, Some("Eval"))),
        ("/v1/openapi.json", "get", op("this document", 200, None)),
    ];
    let mut paths = Map::new();
    for (path, method, o) in routes {
        let entry = paths.entry(path.to_string()).or_insert_with(|| json!({}));
        entry[*method] = o.clone();
    }
    let object = || json!({ "type": "object" });
    json!({
        "openapi": "3.0.3",
        "info": { "title": "taforge", "version": env!("CARGO_PKG_VERSION") },
        "components": {
            "securitySchemes": { "bearer": { "type": "http", "scheme": "bearer" } },
            "schemas": {
                "ApiError": {
                    "type": "object",
                    "required": ["http_status", "machine_code", "message"],
                    "properties": {
                        "http_status": { "type": "integer" },
                        "machine_code": { "type": "string", "enum": MACHINE_CODES },
                        "message": { "type": "string" },
                        "details": { "type": "object" }
                    }
                },
                "CreateWorkspace": {
                    "type": "object",
                    "required": ["source"],
                    "properties": {
                        "workspace_id": { "type": "string" },
                        "name": { "type": "string" },
                        "source": { "type": "object", "description": "kind: ndjson | inline_ndjson | text_files" },
                        "filter": object(),
                        "config": { "type": "object", "description": "provider config; credentials by env-var name only" }
                    }
                },
                "ContextDocument": {
                    "type": "object",
                    "required": ["text"],
                    "properties": {
                        "kind": { "type": "string", "enum": ["research_question", "uploaded_document", "note"] },
                        "text": { "type": "string" }
                    }
                },
                "RunPhase": {
                    "type": "object",
                    "properties": {
                        "step": { "type": "string", "enum": ["concepts", "outline", "split", "initial", "codebook", "global"] },
                        "sample_size": { "type": "integer" },
                        "seed": { "type": "integer" },
                        "filter": object(),
                        "organization": { "type": "string", "enum": ["theme_and_code", "post_by_post"] }
                    }
                },
                "Redo": { "type": "object", "required": ["feedback"], "properties": { "feedback": { "type": "string" } } },
                "Edit": { "type": "object", "required": ["action"], "properties": { "action": { "type": "string" } } },
                "PhaseEval": {
                    "type": "object",
                    "required": ["phase"],
                    "properties": {
                        "phase": { "type": "integer" },
                        "reference": object(),
                        "tau": { "type": "number" },
                        "mode": { "type": "string", "enum": ["hard", "similarity_weighted"] }
                    }
                },
                "Eval": {
                    "type": "object",
                    "required": ["kind", "predicted", "reference"],
                    "properties": {
                        "kind": { "type": "string", "enum": ["set", "coding", "partition"] },
                        "predicted": {},
                        "reference": {},
                        "tau": { "type": "number" },
                        "mode": { "type": "string", "enum": ["hard", "similarity_weighted"] }
                    }
                }
            }
        },
        "security": [{ "bearer": [] }],
        "paths": paths,
    })
}
