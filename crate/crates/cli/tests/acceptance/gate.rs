//! Phase-3 run under the fixture script: only verbatim quotes persist and
//! the hallucination counters match the planted fabrications.

use std::collections::BTreeSet;

use serde_json::Value;
use taforge_core::demo::full_run;
use taforge_core::ingest::Transcript;
use taforge_core::llm::Gateway;
use taforge_core::pipeline::{Origin, Workspace};
use unicode_normalization::UnicodeNormalization;

use crate::{ensure, fixture_script, fixture_workspace, fixtures, Outcome};

/// The fixture generator marks every fabricated quote this way.
const PLANTED: &str = "Paraphrased.";

type Key = (String, String, String);

fn squash(s: &str) -> String {
    let composed: String = s.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn verbatim(t: &Transcript, quote: &str) -> bool {
    let q = squash(quote);
    !q.is_empty() && squash(t.full_text()).contains(&q)
}

#[derive(Default, Debug, PartialEq)]
struct Tally {
    proposed: usize,
    planted: usize,
    schema: usize,
    fabricated: usize,
    keep: BTreeSet<Key>,
}

fn text<'v>(v: &'v Value, k: &str) -> &'v str {
    v[k].as_str().unwrap_or("").trim()
}

/// Walks the script's entries for `template` over `posts`. `known` is the
/// closed label set for global coding; `None` lets any label through.
fn expected(script: &Value, template: &str, ws: &Workspace, posts: &[String], known: Option<&BTreeSet<String>>) -> Result<Tally, String> {
    let mut tally = Tally::default();
    let mut covered = BTreeSet::new();
    for entry in script["entries"].as_array().into_iter().flatten() {
        if entry["template_id"] != template {
            continue;
        }
        let post = entry["when"]["post_id"].as_str().ok_or("entry without post_id")?;
        if !posts.iter().any(|p| p == post) {
            continue;
        }
        covered.insert(post.to_string());
        let t = ws.corpus.get(post).ok_or_else(|| format!("script names unknown post {post}"))?;
        for c in entry["replies"][0]["codes"].as_array().into_iter().flatten() {
            tally.proposed += 1;
            if text(c, "explanation") == PLANTED {
                tally.planted += 1;
            }
            let (label, quote) = (text(c, "code"), text(c, "quote"));
            let unknown = known.is_some_and(|k| !k.contains(&label.to_lowercase()));
            if label.is_empty() || unknown || quote.is_empty() {
                tally.schema += 1;
            } else if !verbatim(t, quote) {
                tally.fabricated += 1;
            } else {
                tally.keep.insert((post.to_string(), label.to_lowercase(), squash(quote)));
            }
        }
    }
    ensure(covered.len() == posts.len(), || format!("{template}: script covers {} of {} posts", covered.len(), posts.len()))?;
    Ok(tally)
}

fn stored(ws: &Workspace, origin: Origin) -> BTreeSet<Key> {
    let c = &ws.data.coding;
    c.applications
        .iter()
        .filter(|a| a.origin == origin)
        .map(|a| {
            let label = c.codebook.iter().find(|k| k.code_id == a.code_id).map(|k| k.label.to_lowercase()).unwrap_or_default();
            (a.post_id.clone(), label, squash(&a.quote))
        })
        .collect()
}

pub fn run() -> Outcome {
    let script: Value = serde_json::from_str(
        &std::fs::read_to_string(fixtures().join("mock_script.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let gw = Gateway::mock(fixture_script());
    let steps = full_run(10, 42);
    // Through global coding.
    let ws = fixture_workspace(&steps[..8], &gw)?;
    let coding = &ws.data.coding;

    let initial = expected(&script, "initial_coding", &ws, &ws.data.load.sample_ids, None)?;
    let s = &coding.initial_stats;
    ensure(initial.planted == initial.fabricated, || {
        format!("initial: {} planted but the oracle finds {} non-verbatim", initial.planted, initial.fabricated)
    })?;
    ensure(initial.planted * 5 == initial.proposed, || {
        format!("initial: {} of {} fabricated, not 20%", initial.planted, initial.proposed)
    })?;
    ensure(s.hallucinations == initial.planted, || format!("initial hallucinations {} != planted {}", s.hallucinations, initial.planted))?;
    ensure(s.proposed == initial.proposed && s.schema_violations == initial.schema, || format!("initial stats {s:?}"))?;
    let kept = stored(&ws, Origin::Initial);
    ensure(kept == initial.keep, || {
        let extra: Vec<_> = kept.difference(&initial.keep).take(3).collect();
        let lost: Vec<_> = initial.keep.difference(&kept).take(3).collect();
        format!("initial stored set differs: extra {extra:?}, missing {lost:?}")
    })?;

    let labels: BTreeSet<String> = coding.codebook.iter().map(|c| c.label.to_lowercase()).collect();
    let global = expected(&script, "global_coding", &ws, &ws.data.load.remainder_ids, Some(&labels))?;
    let g = &coding.global_stats;
    ensure(g.hallucinations == global.fabricated && global.fabricated == global.planted, || {
        format!("global hallucinations {} vs oracle {} vs planted {}", g.hallucinations, global.fabricated, global.planted)
    })?;
    ensure(g.proposed == global.proposed && g.schema_violations == global.schema, || format!("global stats {g:?}"))?;
    let kept_global = stored(&ws, Origin::Global);
    ensure(kept_global == global.keep, || "global stored set differs from the verifiable set".into())?;
    ws.check_invariants().map_err(|e| e.to_string())?;

    Ok(format!(
        "initial: {} proposed, {} planted, {} hallucinations, {} stored ({:.0}% kept); \
         global: {} proposed, {} planted, {} hallucinations, {} unknown-label rejects, {} stored",
        initial.proposed,
        initial.planted,
        s.hallucinations,
        kept.len(),
        100.0 * kept.len() as f64 / initial.proposed as f64,
        global.proposed,
        global.planted,
        g.hallucinations,
        g.schema_violations,
        kept_global.len(),
    ))
}
