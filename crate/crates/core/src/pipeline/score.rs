//! Agreement between what the model proposed for a phase and what the
//! phase holds now (or any other reference).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::phase::Phase;
use super::workspace::{PhaseData, Workspace};
use crate::error::{Error, Result};
use crate::llm::Embedder;
use crate::metrics::{eval_coding, eval_partition, eval_set, AgreementReport, PrfMode};

/// What the machine proposal is compared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ScoreReference {
    /// The phase as it stands, human edits included.
    Current,
    /// The phase as captured by a snapshot.
    Snapshot(String),
    Labels(Vec<String>),
    Coding(BTreeMap<String, Vec<String>>),
    Partition(Vec<Vec<String>>),
}

pub type PhaseScore = AgreementReport;

fn concept_labels(d: &PhaseData) -> Vec<String> {
    d.background.concepts.iter().map(|c| c.label.clone()).collect()
}

fn coding_labels(d: &PhaseData) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for a in &d.coding.applications {
        let Some(code) = d.coding.code(&a.code_id) else { continue };
        let labels = out.entry(a.post_id.clone()).or_default();
        if !labels.contains(&code.label) {
            labels.push(code.label.clone());
        }
    }
    out
}

fn partition(d: &PhaseData, p: Phase) -> Vec<Vec<String>> {
    match p {
        Phase::Review => d.review.buckets.groups(),
        _ => d.themes.buckets.groups(),
    }
}

fn missing(p: Phase) -> Error {
    Error::NotFound(format!("no machine-proposed output recorded for phase {p}"))
}

pub fn score_phase(
    ws: &Workspace,
    phase: Phase,
    reference: &ScoreReference,
    tau: f64,
    mode: PrfMode,
    embedder: &dyn Embedder,
) -> Result<PhaseScore> {
    let d = &ws.data;
    if matches!(phase, Phase::LoadData | Phase::Report) {
        return Err(Error::InvalidArgument(format!("phase {phase} has no agreement metric")));
    }
    if d.states.get(phase).is_empty() {
        return Err(missing(phase));
    }
    let snapshot;
    let refd: Option<&PhaseData> = match reference {
        ScoreReference::Current => Some(d),
        ScoreReference::Snapshot(id) => {
            snapshot = ws
                .snapshot_body(id)
                .ok_or_else(|| Error::NotFound(format!("snapshot {id}")))?;
            Some(snapshot)
        }
        _ => None,
    };
    let kind_mismatch = || Error::InvalidArgument(format!("reference kind does not fit phase {phase}"));
    Ok(match phase {
        Phase::Background => {
            let r = match (refd, reference) {
                (Some(rd), _) => concept_labels(rd),
                (None, ScoreReference::Labels(l)) => l.clone(),
                _ => return Err(kind_mismatch()),
            };
            AgreementReport::Set(eval_set(&d.background.machine_concepts, &r, tau, mode, embedder)?)
        }
        Phase::Coding => {
            let predicted: BTreeMap<String, Vec<String>> = d
                .coding
                .machine_labels
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect();
            if predicted.is_empty() {
                return Err(missing(phase));
            }
            let r = match (refd, reference) {
                (Some(rd), _) => coding_labels(rd),
                (None, ScoreReference::Coding(c)) => c.clone(),
                _ => return Err(kind_mismatch()),
            };
            AgreementReport::Coding(eval_coding(&predicted, &r, tau, mode, embedder)?)
        }
        _ => {
            let payload = if phase == Phase::Review { &d.review } else { &d.themes };
            let predicted = payload.history.last().ok_or_else(|| missing(phase))?.buckets.groups();
            let r = match (refd, reference) {
                (Some(rd), _) => partition(rd, phase),
                (None, ScoreReference::Partition(p)) => p.clone(),
                _ => return Err(kind_mismatch()),
            };
            AgreementReport::Partition(eval_partition(&predicted, &r)?)
        }
    })
}
