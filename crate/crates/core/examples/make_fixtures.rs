//! Regenerates `fixtures/`: the 30-transcript corpus, the scripted mock
//! conversation for a full run, and the golden report.
//!
//! cargo run -p taforge-core --example make_fixtures -- <fixtures dir>

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde_json::{json, Value};
use taforge_core::demo::{full_run, synthetic_dump, DumpOptions};
use taforge_core::ingest::{parse_ndjson, split_corpus, Transcript};
use taforge_core::llm::{ids, Gateway, MockScript, Reply};
use taforge_core::pipeline::{no_progress, verify_quote, CreateSpec, Source, Workspace};
use taforge_core::report::{build_report, to_csv_bytes};

const SAMPLE: usize = 10;
const SEED: u64 = 42;

const CONCEPTS: [&str; 10] = [
    "Insurance", "Appointments", "Telehealth", "Pharmacy", "Trust", "Costs", "Waiting", "Paperwork", "Distance", "Advocacy",
];

fn label_for(sentence: &str) -> Option<&'static str> {
    let s = sentence.to_lowercase();
    let has = |w: &str| s.contains(w);
    Some(if has("paperwork") {
        "Insurance paperwork"
    } else if has("insurance") {
        "Insurance denials"
    } else if has("appointment") {
        "Appointment delays"
    } else if has("telehealth") && has("saved") {
        "Telehealth convenience"
    } else if has("freezing") || has("rushed") {
        "Telehealth glitches"
    } else if has("pharmacy") || has("medication") {
        "Pharmacy shortages"
    } else if has("trust") {
        "Medical trust"
    } else if has("bill") || has("costs") {
        "Hidden costs"
    } else if has("same experience") || has("log of every") || has("advocate") || has("community health") {
        "Peer support"
    } else {
        return None;
    })
}

const CLUSTERS: [(&str, &[&str]); 4] = [
    ("Coverage barriers", &["Insurance denials", "Insurance paperwork", "Hidden costs"]),
    ("Access to care", &["Appointment delays", "Pharmacy shortages"]),
    ("Remote care", &["Telehealth convenience", "Telehealth glitches"]),
    ("Relationships", &["Medical trust", "Peer support"]),
];

const THEMES: [(&str, &[&str]); 2] = [
    ("Systemic obstacles", &["Coverage barriers", "Access to care"]),
    ("Navigating care", &["Remote care", "Relationships"]),
];

fn sentences(t: &Transcript) -> Vec<String> {
    t.full_text()
        .split(['.', '\n'])
        .map(str::trim)
        .filter(|s| s.split_whitespace().count() >= 5)
        .map(String::from)
        .collect()
}

/// A near miss: the same sentence with one word swapped.
fn mutate(sentence: &str, n: usize) -> String {
    let mut words: Vec<&str> = sentence.split(' ').collect();
    let i = n % words.len();
    words[i] = if words[i] == "quietly" { "loudly" } else { "quietly" };
    words.join(" ")
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir).unwrap();
    let opts = DumpOptions::default();
    let dump = synthetic_dump(&opts);
    std::fs::write(dir.join("corpus.ndjson"), &dump).unwrap();

    let corpus = parse_ndjson(std::io::BufReader::new(dump.as_bytes()), &opts.subreddit, "fixture").unwrap();
    assert_eq!(corpus.len(), 30);
    let (sample, rest) = split_corpus(&corpus, SAMPLE, SEED).unwrap();

    let mut script = MockScript::default();
    script.always(ids::RELATED_CONCEPTS, vec![Reply::Json(json!({ "concepts": CONCEPTS }))]);
    script.always(
        ids::CONCEPT_OUTLINE,
        vec![Reply::Json(json!({ "entries": [
            { "concept": "Insurance", "definition": "Coverage decisions, denials and the paperwork that comes with them." },
            { "concept": "Appointments", "definition": "Scheduling, cancellations and how long patients wait to be seen." },
            { "concept": "Telehealth", "definition": "Remote visits and the technology that carries them." },
        ]}))],
    );

    // Initial coding: one fabricated quote after every fourth verbatim one,
    // so exactly a fifth of all proposals are fabricated.
    let mut planned: Vec<(&Transcript, &'static str, String)> = Vec::new();
    for t in sample.transcripts() {
        let mut seen = BTreeSet::new();
        for s in sentences(t) {
            if let Some(label) = label_for(&s) {
                if seen.insert((label, s.clone())) {
                    planned.push((t, label, s));
                }
            }
        }
    }
    planned.truncate(planned.len() / 4 * 4);
    let mut real = 0usize;
    let mut fake = 0usize;
    let mut used = BTreeSet::new();
    let mut by_post: BTreeMap<&str, Vec<Value>> = sample.post_ids().map(|p| (p, Vec::new())).collect();
    for (t, label, s) in &planned {
        let codes = by_post.get_mut(t.post_id.as_str()).unwrap();
        codes.push(json!({ "code": label, "definition": format!("Posts about {}.", label.to_lowercase()), "quote": s, "explanation": format!("Mentions {}.", label.to_lowercase()) }));
        used.insert(*label);
        real += 1;
        if real % 4 == 0 {
            let q = mutate(s, real);
            assert!(!verify_quote(t, &q).unwrap());
            codes.push(json!({ "code": label, "definition": "d", "quote": q, "explanation": "Paraphrased." }));
            fake += 1;
        }
    }
    for (post, codes) in by_post {
        script.on(ids::INITIAL_CODING, "post_id", post, vec![Reply::Json(json!({ "codes": codes }))]);
    }
    assert_eq!(fake * 5, real + fake);
    eprintln!("initial: {real} verbatim, {fake} fabricated");

    let definitions: Vec<Value> = used
        .iter()
        .map(|l| json!({ "code": l, "definition": format!("Passages where the writer describes {}.", l.to_lowercase()) }))
        .collect();
    script.always(ids::CODEBOOK_DEFINITIONS, vec![Reply::Json(json!({ "codes": definitions }))]);

    // Global coding: known labels only, plus a planted novel label every
    // seventh post and a fabricated quote every sixth.
    for (i, t) in rest.transcripts().iter().enumerate() {
        let mut codes = Vec::new();
        let mut seen = BTreeSet::new();
        for s in sentences(t) {
            let Some(label) = label_for(&s).filter(|l| used.contains(l)) else { continue };
            if seen.insert((label, s.clone())) {
                codes.push(json!({ "code": label, "quote": s, "explanation": format!("Applies {label}.") }));
            }
        }
        if i % 7 == 3 {
            let s = &sentences(t)[0];
            codes.push(json!({ "code": "Parking problems", "quote": s, "explanation": "Not in the codebook." }));
        }
        if i % 6 == 1 {
            let s = &sentences(t)[0];
            let label = used.iter().next().unwrap();
            codes.push(json!({ "code": label, "quote": mutate(s, i), "explanation": "Paraphrased." }));
        }
        script.on(ids::GLOBAL_CODING, "post_id", &t.post_id, vec![Reply::Json(json!({ "codes": codes }))]);
    }

    let clusters: Vec<Value> = CLUSTERS
        .iter()
        .map(|(name, codes)| json!({ "reviewed_code": name, "codes": codes.iter().filter(|c| used.contains(*c)).collect::<Vec<_>>() }))
        .collect();
    script.always(ids::CLUSTER_CODES, vec![Reply::Json(json!({ "clusters": clusters }))]);
    let themes: Vec<Value> = THEMES.iter().map(|(n, r)| json!({ "theme": n, "reviewed_codes": r })).collect();
    script.always(ids::GENERATE_THEMES, vec![Reply::Json(json!({ "themes": themes }))]);

    let text = serde_json::to_string_pretty(&script).unwrap() + "\n";
    std::fs::write(dir.join("mock_script.json"), &text).unwrap();

    let spec = CreateSpec {
        workspace_id: "fixture".into(),
        name: "fixture".into(),
        source: Source::InlineNdjson { text: dump.clone(), subreddit: opts.subreddit.clone() },
        filter: Default::default(),
        config: None,
    };
    let gw = Gateway::mock(script);
    let mut ws = Workspace::create(&spec, 1_700_000_000_000).unwrap();
    for (i, m) in full_run(SAMPLE, SEED).iter().enumerate() {
        ws.apply(m, 1_700_000_000_000 + i as i64 * 1_000, &gw, &no_progress).unwrap();
    }
    let mut counts = BTreeMap::new();
    for a in &ws.data.coding.applications {
        *counts.entry(format!("{:?}", a.origin)).or_insert(0) += 1;
    }
    eprintln!("stored: {counts:?}; global stats {:?}", ws.data.coding.global_stats);
    let rows = build_report(&ws, Default::default()).unwrap();
    std::fs::write(dir.join("golden_report.csv"), to_csv_bytes(&rows).unwrap()).unwrap();
    eprintln!("{} report rows", rows.len());
}
