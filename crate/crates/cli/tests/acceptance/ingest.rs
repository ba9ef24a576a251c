//! Dump parsing plus filtering against a brute-force scan.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use taforge_core::ingest::{apply_filter, parse_ndjson, CorpusFilter};

use crate::{ensure, Outcome};

const LINES: usize = 10_000;
const MIN_LINES_PER_SEC: f64 = 50_000.0;
const START: i64 = 1_650_000_000;

const WORDS: &[&str] = &[
    "insulin", "Insulin", "clinic", "pharmacy", "copay", "waiting", "room", "nurse", "called", "back", "my", "the",
    "refill", "denied", "telehealth", "visit", "CLINIC", "again", "today",
];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(3..12);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn timestamp(t: i64, rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..4) {
        0 => json!(t.to_string()),
        1 => json!(t as f64),
        _ => json!(t),
    }
}

fn text_or_gap(rng: &mut ChaCha8Rng) -> Option<String> {
    match rng.random_range(0..10) {
        0 => Some(String::new()),
        1 => Some("[deleted]".into()),
        2 => Some(" [removed] ".into()),
        3 => Some(" \n ".into()),
        4 => None,
        _ => Some(sentence(rng)),
    }
}

fn dump(rng: &mut ChaCha8Rng) -> String {
    let subs = ["HealthAccess", "healthaccess", "HEALTHACCESS", "HealthAccess", "Cooking", "AskDocs"];
    let mut lines: Vec<String> = Vec::with_capacity(LINES);
    let mut posts = 0usize;
    while lines.len() < LINES {
        let roll = rng.random_range(0..100);
        let line = if roll < 25 || posts == 0 {
            posts += 1;
            let mut v = json!({
                "id": format!("s{posts:05}"),
                "subreddit": subs.choose(rng).unwrap(),
                "created_utc": timestamp(START + 600 * posts as i64, rng),
                "title": sentence(rng),
            });
            if let Some(t) = text_or_gap(rng) {
                v["selftext"] = json!(t);
            }
            v.to_string()
        } else if roll < 88 {
            let parent = if rng.random_bool(0.05) { posts + 10_000 } else { rng.random_range(1..=posts) };
            let prefix = if rng.random_bool(0.8) { "t3_" } else { "" };
            let mut v = json!({
                "id": format!("c{}", lines.len()),
                "subreddit": subs.choose(rng).unwrap(),
                "created_utc": timestamp(START + 600 * parent as i64 + rng.random_range(1..6_000), rng),
                "link_id": format!("{prefix}s{parent:05}"),
            });
            if let Some(t) = text_or_gap(rng) {
                v["body"] = json!(t);
            }
            v.to_string()
        } else if roll < 91 && !lines.is_empty() {
            // Exact repeat of an earlier record.
            lines[rng.random_range(0..lines.len())].clone()
        } else {
            match rng.random_range(0..7) {
                0 => String::new(),
                1 => "   ".into(),
                2 => "{\"id\": \"cut".into(),
                3 => "not json".into(),
                4 => json!({ "subreddit": "HealthAccess", "created_utc": START, "title": "no id" }).to_string(),
                5 => json!({ "id": "z1", "subreddit": "HealthAccess", "created_utc": "soon", "title": "bad time" }).to_string(),
                _ => json!({ "id": format!("o{}", lines.len()), "subreddit": "HealthAccess", "created_utc": START, "body": "no link" }).to_string(),
            }
        };
        lines.push(line);
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[derive(Debug, PartialEq)]
struct Post {
    created: i64,
    title: String,
    body: String,
    comments: Vec<(i64, String, String)>,
}

fn scrub(s: &str) -> String {
    if matches!(s.trim(), "[deleted]" | "[removed]") {
        String::new()
    } else {
        s.to_string()
    }
}

fn seconds(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s.trim().parse::<f64>().ok().map(|f| f as i64),
        _ => None,
    }
}

/// Straight reading of the rules, one line at a time.
fn brute_force(text: &str, subreddit: &str) -> BTreeMap<String, Post> {
    let mut posts = BTreeMap::new();
    let mut comments = Vec::new();
    for line in text.lines() {
        let Ok(v) = serde_json::from_str::<Value>(line) else { continue };
        let (Some(id), Some(sub), Some(created)) = (v["id"].as_str(), v["subreddit"].as_str(), seconds(&v["created_utc"])) else {
            continue;
        };
        if id.is_empty() || !sub.eq_ignore_ascii_case(subreddit) {
            continue;
        }
        if let Some(title) = v["title"].as_str() {
            posts.insert(
                id.to_string(),
                Post { created, title: title.into(), body: scrub(v["selftext"].as_str().unwrap_or("")), comments: Vec::new() },
            );
        } else if let Some(link) = v["link_id"].as_str() {
            let link = link.strip_prefix("t3_").unwrap_or(link).to_string();
            comments.push((link, created, id.to_string(), scrub(v["body"].as_str().unwrap_or(""))));
        }
    }
    comments.sort();
    comments.dedup();
    for (link, created, id, text) in comments {
        if text.trim().is_empty() {
            continue;
        }
        if let Some(p) = posts.get_mut(&link) {
            p.comments.push((created, id, text));
        }
    }
    posts
}

fn keep(p: &Post, f: &CorpusFilter) -> bool {
    if f.date_from.is_some_and(|d| p.created < d) || f.date_to.is_some_and(|d| p.created >= d) {
        return false;
    }
    if f.drop_empty && p.body.trim().is_empty() && p.comments.is_empty() {
        return false;
    }
    let mut full = format!("{}\n{}", p.title, p.body);
    for (_, _, t) in &p.comments {
        full.push('\n');
        full.push_str(t);
    }
    f.keyword.as_deref().is_none_or(|k| full.to_lowercase().contains(&k.to_lowercase()))
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let text = dump(&mut rng);
    let posts = brute_force(&text, "HealthAccess");
    let span = 600 * posts.len() as i64;
    let filters = vec![
        CorpusFilter::default(),
        CorpusFilter { keyword: Some("insulin".into()), ..Default::default() },
        CorpusFilter { keyword: Some("Clinic Pharmacy".into()), ..Default::default() },
        CorpusFilter { drop_empty: true, ..Default::default() },
        CorpusFilter { date_from: Some(START + span / 4), date_to: Some(START + span / 2), ..Default::default() },
        CorpusFilter { date_to: Some(START + span / 3), drop_empty: true, keyword: Some("REFILL".into()), ..Default::default() },
        CorpusFilter { date_from: Some(START + span / 2), keyword: Some("nurse called".into()), ..Default::default() },
    ];
    let mut elapsed = 0.0;
    let mut checked = 0usize;
    for f in &filters {
        let start = Instant::now();
        let corpus = parse_ndjson(BufReader::new(text.as_bytes()), "HealthAccess", "acceptance").map_err(|e| e.to_string())?;
        let corpus = apply_filter(&corpus, f).map_err(|e| e.to_string())?;
        elapsed += start.elapsed().as_secs_f64();

        let want: Vec<&String> = posts.iter().filter(|(_, p)| keep(p, f)).map(|(id, _)| id).collect();
        let got: Vec<&String> = corpus.transcripts().iter().map(|t| &t.post_id).collect();
        ensure(want == got, || format!("filter {f:?}: {} posts expected, {} kept", want.len(), got.len()))?;
        for t in corpus.transcripts() {
            let p = &posts[&t.post_id];
            let ids: Vec<&str> = t.comments().iter().map(|c| c.comment_id.as_str()).collect();
            let expect: Vec<&str> = p.comments.iter().map(|(_, id, _)| id.as_str()).collect();
            ensure(ids == expect && t.body == p.body && t.created_utc == p.created, || format!("post {} differs", t.post_id))?;
        }
        checked += want.len();
    }
    let rate = (LINES * filters.len()) as f64 / elapsed;
    ensure(rate >= MIN_LINES_PER_SEC, || format!("throughput {rate:.0} lines/s below {MIN_LINES_PER_SEC}"))?;
    Ok(format!(
        "{LINES}-line dump, {} matching posts, {} filters agree with the brute-force scan ({checked} kept posts compared); \
         {rate:.0} lines/s (floor {MIN_LINES_PER_SEC})",
        posts.len(),
        filters.len()
    ))
}
