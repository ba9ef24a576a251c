//! JSON shapes returned to clients.

use serde_json::{json, Value};
use taforge_core::pipeline::{Outcome, Phase, PhaseStatus, Workspace};

use crate::state::{Slot, SlotView};

pub fn phase_rows(ws: &Workspace) -> Vec<Value> {
    Phase::ALL
        .iter()
        .map(|&p| {
            let s = ws.data.states.get(p);
            json!({
                "phase": p,
                "name": p.name(),
                "status": if ws.data.is_stale(p) && !s.is_empty() { PhaseStatus::Stale } else { s.effective_status() },
                "stale": ws.data.is_stale(p),
                "complete": ws.data.is_complete(p),
                "produced_by": s.produced_by,
                "updated_at": s.updated_at,
            })
        })
        .collect()
}

pub fn workspace(slot: &Slot) -> Value {
    let busy = slot.running_job();
    match slot.view() {
        SlotView::Ready(ws) => json!({
            "workspace_id": ws.id(),
            "status": "ok",
            "manifest": ws.manifest,
            "corpus": {
                "transcripts": ws.corpus.len(),
                "source": ws.corpus.source_descriptor,
                "filter": ws.corpus.filter_applied,
                "stats": ws.corpus.stats,
            },
            "context_documents": ws.context.documents().len(),
            "phases": phase_rows(&ws),
            "stale_phases": ws.data.stale_phases(),
            "snapshots": ws.snapshots.len(),
            "running_job": busy,
        }),
        SlotView::Degraded { manifest, reason } => json!({
            "workspace_id": slot.id,
            "status": "degraded",
            "degraded_reason": reason,
            "manifest": manifest,
            "running_job": busy,
        }),
    }
}

pub fn listing(slot: &Slot) -> Value {
    match slot.view() {
        SlotView::Ready(ws) => json!({
            "workspace_id": ws.id(),
            "name": ws.manifest.name,
            "status": "ok",
            "created_at": ws.manifest.created_at,
            "stale_phases": ws.data.stale_phases(),
        }),
        SlotView::Degraded { manifest, reason } => json!({
            "workspace_id": slot.id,
            "name": manifest.as_ref().map(|m| m.name.clone()),
            "status": "degraded",
            "degraded_reason": reason,
        }),
    }
}

pub fn phase(ws: &Workspace, p: Phase) -> Value {
    let mut v = ws.data.phase_file(p).unwrap_or_default();
    v["phase"] = json!(p);
    v["name"] = json!(p.name());
    v["stale"] = json!(ws.data.is_stale(p));
    v["complete"] = json!(ws.data.is_complete(p));
    v
}

/// Response to an edit: the touched phase plus what went stale.
pub fn edit(ws: &Workspace, p: Option<Phase>, out: &Outcome) -> Value {
    json!({
        "phase": p.map(|p| phase(ws, p)),
        "newly_stale": out.newly_stale,
        "stale_phases": ws.data.stale_phases(),
        "warnings": out.warnings,
        "details": out.details,
        "snapshot": out.snapshot,
    })
}
