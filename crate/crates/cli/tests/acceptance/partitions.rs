//! Random edits and scripted regenerations never break the partitions.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use taforge_core::demo::full_run;
use taforge_core::llm::{ids, Gateway, MockScript, Reply};
use taforge_core::pipeline::{no_progress, BucketEdit, BucketSet, CodebookEdit, Mutation, Phase, Workspace};

use crate::{fixture_script, fixture_workspace, Outcome};

const ACTIONS: usize = 10_000;
const RESET_EVERY: usize = 500;
const FULL_CHECK_EVERY: usize = 100;

const NAMES: &[&str] = &[
    "Access to care", "ACCESS TO CARE", " access to care ", "Coverage barriers", "Remote care", "Relationships",
    "Costs", "Navigating care", "Systemic obstacles", "", "  ", "New group", "new group", "Misc",
];

/// Independent statement of the invariant: every code in exactly one
/// non-empty bucket, nothing else, distinct ids, distinct non-blank names
/// ignoring case and outer whitespace.
fn violation(set: &BucketSet, universe: &BTreeSet<String>) -> Option<String> {
    let mut ids = BTreeSet::new();
    let mut names = BTreeSet::new();
    let mut seen = BTreeSet::new();
    for b in &set.buckets {
        if b.members.is_empty() {
            return Some(format!("{} is empty", b.bucket_id));
        }
        if !ids.insert(b.bucket_id.as_str()) {
            return Some(format!("{} repeated", b.bucket_id));
        }
        let key = b.name.trim().to_lowercase();
        if key.is_empty() || !names.insert(key) {
            return Some(format!("name {:?} blank or repeated", b.name));
        }
        for m in &b.members {
            if !universe.contains(m) || !seen.insert(m.as_str()) {
                return Some(format!("{m} unknown or placed twice"));
            }
        }
    }
    (seen.len() != universe.len()).then(|| format!("{} of {} codes placed", seen.len(), universe.len()))
}

fn check(ws: &Workspace) -> Result<(), String> {
    let universe: BTreeSet<String> = ws.data.coding.codebook.iter().map(|c| c.code_id.clone()).collect();
    for (p, payload) in [(Phase::Review, &ws.data.review), (Phase::Themes, &ws.data.themes)] {
        if ws.data.states.get(p).is_empty() {
            continue;
        }
        if let Some(v) = violation(&payload.buckets, &universe) {
            return Err(format!("phase {p}: {v}"));
        }
    }
    Ok(())
}

fn pick<'a>(rng: &mut ChaCha8Rng, real: &'a [String], bogus: &'a str) -> String {
    if real.is_empty() || rng.random_bool(0.08) {
        bogus.to_string()
    } else {
        real.choose(rng).unwrap().clone()
    }
}

fn name(rng: &mut ChaCha8Rng) -> String {
    NAMES.choose(rng).unwrap().to_string()
}

fn bucket_edit(set: &BucketSet, codes: &[String], rng: &mut ChaCha8Rng) -> BucketEdit {
    let buckets: Vec<String> = set.buckets.iter().map(|b| b.bucket_id.clone()).collect();
    match rng.random_range(0..10) {
        0..=3 => BucketEdit::MoveCode { code_id: pick(rng, codes, "code-9999"), to: pick(rng, &buckets, "xx-999") },
        4 => BucketEdit::Create {
            name: name(rng),
            members: (0..rng.random_range(0..=3)).map(|_| pick(rng, codes, "code-9999")).collect(),
        },
        5 | 6 => BucketEdit::Rename { bucket_id: pick(rng, &buckets, "xx-999"), name: name(rng) },
        7 => BucketEdit::Delete {
            bucket_id: pick(rng, &buckets, "xx-999"),
            destination: rng.random_bool(0.85).then(|| pick(rng, &buckets, "xx-999")),
        },
        _ => BucketEdit::Merge {
            bucket_ids: (0..rng.random_range(0..=3)).map(|_| pick(rng, &buckets, "xx-999")).collect(),
            name: rng.random_bool(0.5).then(|| name(rng)),
        },
    }
}

fn codebook_edit(ws: &Workspace, rng: &mut ChaCha8Rng, n: usize) -> CodebookEdit {
    let codes: Vec<String> = ws.data.coding.codebook.iter().map(|c| c.code_id.clone()).collect();
    let labels: Vec<String> = ws.data.coding.codebook.iter().map(|c| c.label.clone()).collect();
    match rng.random_range(0..4) {
        0 => CodebookEdit::Add {
            label: if rng.random_bool(0.2) { pick(rng, &labels, "x") } else { format!("Fuzz code {n}") },
            definition: "added while fuzzing".into(),
        },
        1 => CodebookEdit::Delete { code_id: pick(rng, &codes, "code-9999") },
        2 => CodebookEdit::Merge {
            code_ids: (0..rng.random_range(1..=2)).map(|_| pick(rng, &codes, "code-9999")).collect(),
            into: pick(rng, &codes, "code-9999"),
        },
        _ => CodebookEdit::Rename { code_id: pick(rng, &codes, "code-9999"), label: pick(rng, &labels, "Fresh label") },
    }
}

/// Proposed groups over `names` with the usual model mistakes: items left
/// out, listed twice, invented, and group names repeated or blank.
fn sloppy_groups(names: &[String], rng: &mut ChaCha8Rng) -> Vec<(String, Vec<String>)> {
    let mut shuffled = names.to_vec();
    shuffled.shuffle(rng);
    let k = rng.random_range(1..=4);
    let mut groups: Vec<(String, Vec<String>)> = (0..k).map(|_| (NAMES.choose(rng).unwrap().to_string(), Vec::new())).collect();
    for item in shuffled {
        if rng.random_bool(0.15) {
            continue;
        }
        let g = rng.random_range(0..k);
        groups[g].1.push(item.clone());
        if rng.random_bool(0.1) {
            let h = rng.random_range(0..k);
            groups[h].1.push(item.to_uppercase());
        }
    }
    if rng.random_bool(0.3) {
        groups[0].1.push("Invented item".into());
    }
    groups
}

fn regeneration(ws: &Workspace, rng: &mut ChaCha8Rng) -> (Mutation, Gateway) {
    let themes = rng.random_bool(0.5);
    let (names, template, key, name_key, members_key): (Vec<String>, _, _, _, _) = if themes {
        let names = ws.data.review.buckets.buckets.iter().map(|b| b.name.clone()).collect();
        (names, ids::GENERATE_THEMES, "themes", "theme", "reviewed_codes")
    } else {
        let names = ws.data.coding.codebook.iter().map(|c| c.label.clone()).collect();
        (names, ids::CLUSTER_CODES, "clusters", "reviewed_code", "codes")
    };
    let groups: Vec<Value> = sloppy_groups(&names, rng)
        .into_iter()
        .map(|(n, ms)| json!({ name_key: n, members_key: ms }))
        .collect();
    let mut script = MockScript::default();
    script.always(template, vec![Reply::Json(json!({ key: groups }))]);
    let redo = rng.random_bool(0.5);
    let feedback = "Split the large group".to_string();
    let m = match (themes, redo) {
        (false, false) => Mutation::ClusterCodes,
        (false, true) => Mutation::RedoClusters { feedback },
        (true, false) => Mutation::GenerateThemes,
        (true, true) => Mutation::RedoThemes { feedback },
    };
    (m, Gateway::mock(script))
}

pub fn run() -> Outcome {
    let gw = Gateway::mock(fixture_script());
    let base = fixture_workspace(&full_run(10, 42)[..10], &gw)?;
    check(&base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ws = base.clone();
    let (mut accepted, mut rejected, mut regenerations, mut repairs) = (0usize, 0usize, 0usize, 0usize);
    for n in 0..ACTIONS {
        if n % RESET_EVERY == 0 {
            ws = base.clone();
        }
        let codes: Vec<String> = ws.data.coding.codebook.iter().map(|c| c.code_id.clone()).collect();
        let (m, local) = match rng.random_range(0..100) {
            0..=39 => (Mutation::EditClusters { edit: bucket_edit(&ws.data.review.buckets, &codes, &mut rng) }, None),
            40..=74 => (Mutation::EditThemes { edit: bucket_edit(&ws.data.themes.buckets, &codes, &mut rng) }, None),
            75..=81 => (Mutation::EditCodebook { edit: codebook_edit(&ws, &mut rng, n) }, None),
            _ => {
                let (m, g) = regeneration(&ws, &mut rng);
                (m, Some(g))
            }
        };
        let before = ws.data.clone();
        match ws.apply(&m, n as i64 + 100, local.as_ref().unwrap_or(&gw), &no_progress) {
            Ok(outcome) => {
                accepted += 1;
                if local.is_some() {
                    regenerations += 1;
                    repairs += outcome.warnings.len();
                }
            }
            Err(_) => {
                rejected += 1;
                if ws.data != before {
                    return Err(format!("action {n} ({}) failed but changed the workspace", m.operation()));
                }
            }
        }
        check(&ws).map_err(|e| format!("after action {n} ({m:?}): {e}"))?;
        if n % FULL_CHECK_EVERY == 0 {
            ws.check_invariants().map_err(|e| format!("after action {n}: {e}"))?;
        }
    }
    Ok(format!(
        "{ACTIONS} actions ({accepted} applied, {rejected} rejected), {regenerations} scripted regenerations \
         with {repairs} repairs, no partition or name violations"
    ))
}
