//! Every edit of phase p marks every later phase holding a payload stale,
//! and nothing upstream.

use taforge_core::demo::full_run;
use taforge_core::llm::Gateway;
use taforge_core::pipeline::{
    no_progress, ApplicationEdit, BucketEdit, CodebookEdit, ConceptEdit, Mutation, Organization, Phase, Workspace,
};

use crate::{fixture_script, fixture_workspace, Outcome};

/// Steps of the demo plan after which phase k (index k-1) is complete.
const COMPLETE_AFTER: [usize; 6] = [4, 5, 8, 9, 10, 11];

fn first_bucket_member(ws: &Workspace, themes: bool) -> (String, String, String) {
    let set = if themes { &ws.data.themes.buckets } else { &ws.data.review.buckets };
    let a = &set.buckets[0];
    let b = &set.buckets[1 % set.buckets.len()];
    (a.bucket_id.clone(), b.bucket_id.clone(), a.members.iter().next().cloned().unwrap_or_default())
}

fn edits(p: Phase, ws: &Workspace) -> Vec<Mutation> {
    let concept = |id: &str| id.to_string();
    match p {
        Phase::Background => vec![
            Mutation::EditConcepts { edit: ConceptEdit::Rename { concept_id: concept("concept-001"), label: "Renamed concept".into() } },
            Mutation::EditConcepts { edit: ConceptEdit::Add { label: "Extra concept".into() } },
            Mutation::EditConcepts { edit: ConceptEdit::Delete { concept_id: concept("concept-003") } },
            Mutation::SelectConcepts { concept_ids: [concept("concept-001"), concept("concept-002")].into() },
            Mutation::EditOutline { concept_id: concept("concept-001"), definition: "A sharper definition".into() },
            Mutation::GenerateOutline,
        ],
        Phase::LoadData => vec![Mutation::LoadData { sample_size: Some(10), seed: Some(43), filter: None }],
        Phase::Coding => {
            let c = &ws.data.coding;
            let codes: Vec<&str> = c.codebook.iter().map(|k| k.code_id.as_str()).collect();
            let app = &c.applications[0];
            let other = codes.iter().find(|&&k| k != app.code_id).copied().unwrap_or(codes[0]);
            vec![
                Mutation::EditCodebook { edit: CodebookEdit::Rename { code_id: codes[0].into(), label: "Renamed code".into() } },
                Mutation::EditCodebook { edit: CodebookEdit::Redefine { code_id: codes[0].into(), definition: "Redefined".into() } },
                Mutation::EditCodebook { edit: CodebookEdit::Add { label: "Brand new code".into(), definition: "New".into() } },
                Mutation::EditCodebook { edit: CodebookEdit::Delete { code_id: codes[codes.len() - 1].into() } },
                Mutation::EditCodebook { edit: CodebookEdit::Merge { code_ids: vec![codes[1].into()], into: codes[0].into() } },
                Mutation::EditApplication { edit: ApplicationEdit::Delete { application_id: app.application_id.clone() } },
                Mutation::EditApplication {
                    edit: ApplicationEdit::Add {
                        post_id: app.post_id.clone(),
                        code_id: Some(other.into()),
                        label: None,
                        definition: None,
                        quote: app.quote.clone(),
                        explanation: "Also fits here".into(),
                    },
                },
                Mutation::EditApplication {
                    edit: ApplicationEdit::Edit {
                        application_id: app.application_id.clone(),
                        code_id: None,
                        quote: None,
                        explanation: Some("Reworded".into()),
                    },
                },
            ]
        }
        Phase::Review => {
            let (a, b, code) = first_bucket_member(ws, false);
            vec![
                Mutation::EditClusters { edit: BucketEdit::Rename { bucket_id: a.clone(), name: "Renamed cluster".into() } },
                Mutation::EditClusters { edit: BucketEdit::Create { name: "Fresh cluster".into(), members: vec![code.clone()] } },
                Mutation::EditClusters { edit: BucketEdit::MoveCode { code_id: code, to: b.clone() } },
                Mutation::EditClusters { edit: BucketEdit::Merge { bucket_ids: vec![a, b], name: None } },
                Mutation::RedoClusters { feedback: "Fewer clusters please".into() },
                Mutation::ClusterCodes,
            ]
        }
        Phase::Themes => {
            let (a, b, code) = first_bucket_member(ws, true);
            vec![
                Mutation::EditThemes { edit: BucketEdit::Rename { bucket_id: a, name: "Renamed theme".into() } },
                Mutation::EditThemes { edit: BucketEdit::MoveCode { code_id: code, to: b } },
                Mutation::RedoThemes { feedback: "Name them after outcomes".into() },
                Mutation::GenerateThemes,
            ]
        }
        Phase::Report => vec![Mutation::BuildReport { organization: Organization::PostByPost }],
    }
}

pub fn run() -> Outcome {
    let steps = full_run(10, 42);
    let (mut combos, mut flagged, mut untouched) = (0usize, 0usize, 0usize);
    for k in 1..=6u8 {
        let gw = Gateway::mock(fixture_script());
        let base = fixture_workspace(&steps[..COMPLETE_AFTER[k as usize - 1]], &gw)?;
        for p in 1..=k {
            let edited = Phase::from_number(p).map_err(|e| e.to_string())?;
            for m in edits(edited, &base) {
                let mut ws = base.clone();
                let gw = Gateway::mock(fixture_script());
                ws.apply(&m, 1_000, &gw, &no_progress)
                    .map_err(|e| format!("through phase {k}, {} failed: {e}", m.operation()))?;
                combos += 1;
                for q in 1..=k {
                    let phase = Phase::from_number(q).map_err(|e| e.to_string())?;
                    if q > p && !ws.data.is_stale(phase) {
                        return Err(format!("through phase {k}: {} left phase {q} fresh", m.operation()));
                    }
                    // A concept edit outdates the outline within phase 1 itself;
                    // that flag is not the phase status.
                    if q <= p && ws.data.states.get(phase).stale {
                        return Err(format!("through phase {k}: {} marked phase {q} stale", m.operation()));
                    }
                    if q > p {
                        flagged += 1;
                    } else {
                        untouched += 1;
                    }
                }
            }
        }
    }
    Ok(format!(
        "{combos} (workspace depth, edit) combinations; {flagged} downstream phases flagged stale, \
         {untouched} upstream or edited phases left fresh"
    ))
}
