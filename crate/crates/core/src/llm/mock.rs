//! Deterministic offline provider.
//!
//! Replies come from a [`MockScript`] when an entry matches the request
//! (by template id plus either the request digest or variable equality);
//! otherwise a rule-based generator fabricates a schema-valid answer from
//! the request variables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::provider::{ChatCall, ChatProvider};
use super::template::{ids, StructuredRequest};
use super::vars::parse_nested_lines;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reply {
    Error {
        error: String,
        #[serde(default)]
        retryable: bool,
    },
    Text(String),
    Json(Value),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub template_id: String,
    /// Matches when the request digest equals this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    /// Matches when every listed variable equals the given value. The key
    /// `$feedback` compares against the feedback text (empty when absent).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub when: BTreeMap<String, String>,
    /// Consumed one per call; the last reply repeats.
    pub replies: Vec<Reply>,
}

impl ScriptEntry {
    fn matches(&self, req: &StructuredRequest) -> bool {
        if self.template_id != req.template_id {
            return false;
        }
        if let Some(d) = &self.digest {
            if *d != req.digest() {
                return false;
            }
        }
        self.when.iter().all(|(k, v)| {
            if k == "$feedback" {
                req.feedback.as_ref().map(|f| f.text.as_str()).unwrap_or("") == v
            } else {
                req.variables.get(k) == Some(v)
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
    /// Simulated provider latency per call.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub latency_ms: u64,
}

fn is_zero(n: &u64) -> bool {
    *n == 0
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn push(&mut self, entry: ScriptEntry) -> &mut Self {
        self.entries.push(entry);
        self
    }

    /// Entry keyed on one variable.
    pub fn on(&mut self, template_id: &str, var: &str, value: &str, replies: Vec<Reply>) -> &mut Self {
        self.push(ScriptEntry {
            template_id: template_id.into(),
            digest: None,
            when: [(var.to_string(), value.to_string())].into(),
            replies,
        })
    }

    /// Entry matching every request for a template.
    pub fn always(&mut self, template_id: &str, replies: Vec<Reply>) -> &mut Self {
        self.push(ScriptEntry {
            template_id: template_id.into(),
            digest: None,
            when: BTreeMap::new(),
            replies,
        })
    }
}

#[derive(Debug, Default)]
pub struct MockProvider {
    script: MockScript,
    consumed: Mutex<HashMap<usize, usize>>,
    calls: Mutex<Vec<String>>,
}

impl MockProvider {
    pub fn new(script: MockScript) -> Self {
        MockProvider {
            script,
            ..Default::default()
        }
    }

    /// Template ids of every call received, in arrival order.
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().expect("mock lock").clone()
    }

    fn scripted(&self, req: &StructuredRequest) -> Option<Reply> {
        let (idx, entry) = self
            .script
            .entries
            .iter()
            .enumerate()
            .find(|(_, e)| e.matches(req))?;
        if entry.replies.is_empty() {
            return None;
        }
        let mut consumed = self.consumed.lock().expect("mock lock");
        let n = consumed.entry(idx).or_insert(0);
        let reply = entry.replies[(*n).min(entry.replies.len() - 1)].clone();
        *n += 1;
        Some(reply)
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String> {
        self.calls
            .lock()
            .expect("mock lock")
            .push(call.request.template_id.clone());
        if self.script.latency_ms > 0 {
            std::thread::sleep(std::time::Duration::from_millis(self.script.latency_ms));
        }
        match self.scripted(call.request) {
            Some(Reply::Text(t)) => Ok(t),
            Some(Reply::Json(v)) => Ok(v.to_string()),
            Some(Reply::Error { error, retryable }) => Err(Error::Provider {
                message: error,
                retryable,
            }),
            None => Ok(fabricate(call.request).to_string()),
        }
    }
}

const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "also", "because", "been", "before", "being", "between",
    "both", "cannot", "could", "does", "doing", "down", "during", "each", "even", "every", "from",
    "further", "have", "having", "here", "into", "itself", "just", "like", "more", "most", "much",
    "must", "only", "other", "ought", "over", "really", "same", "should", "some", "such", "than",
    "that", "their", "them", "then", "there", "these", "they", "thing", "things", "this", "those",
    "through", "under", "until", "very", "want", "were", "what", "when", "where", "which", "while",
    "with", "would", "your", "yours", "will", "anyone", "people", "think", "know", "using", "used",
    "make", "made", "many", "anything", "something", "still", "well", "going", "getting",
];

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.chars().count() >= 4)
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()) && !w.chars().all(|c| c.is_ascii_digit()))
}

fn title_case(word: &str) -> String {
    let mut c = word.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '?', '!', '\n'])
        .map(str::trim)
        .filter(|s| s.split_whitespace().count() >= 5)
        .collect()
}

fn var<'a>(req: &'a StructuredRequest, name: &str) -> &'a str {
    req.variables.get(name).map(String::as_str).unwrap_or("")
}

/// Rule-based answer for any builtin template.
pub fn fabricate(req: &StructuredRequest) -> Value {
    let feedback = req.feedback.as_ref().map(|f| f.text.to_lowercase());
    match req.template_id.as_str() {
        ids::RELATED_CONCEPTS => {
            let mut freq: BTreeMap<String, usize> = BTreeMap::new();
            let source = format!("{}\n{}", var(req, "research_questions"), req.context_snippets.join("\n"));
            for w in words(&source) {
                *freq.entry(w).or_default() += 1;
            }
            let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let labels: Vec<String> = ranked
                .into_iter()
                .map(|(w, _)| title_case(&w))
                .filter(|l| feedback.as_ref().is_none_or(|f| !f.contains(&l.to_lowercase())))
                .take(12)
                .collect();
            json!({ "concepts": labels })
        }
        ids::CONCEPT_OUTLINE => {
            let entries: Vec<Value> = parse_nested_lines(var(req, "concepts"))
                .into_iter()
                .map(|(label, _)| {
                    json!({
                        "concept": label,
                        "definition": format!(
                            "Discussion of {} as it bears on the research questions.",
                            label.to_lowercase()
                        ),
                    })
                })
                .collect();
            json!({ "entries": entries })
        }
        ids::INITIAL_CODING => {
            let outline = parse_nested_lines(var(req, "concept_outline"));
            let transcript = var(req, "transcript");
            let mut codes = Vec::new();
            let mut used = BTreeSet::new();
            for sentence in sentences(transcript) {
                if codes.len() == 3 {
                    break;
                }
                let lower = sentence.to_lowercase();
                let concept = outline.iter().find(|(label, _)| {
                    words(label).any(|w| lower.contains(&w))
                });
                let (label, definition) = match concept {
                    Some((label, defs)) => (
                        label.clone(),
                        defs.first().cloned().unwrap_or_else(|| format!("Mentions of {label}.")),
                    ),
                    None => {
                        let Some(w) = words(sentence).max_by(|a, b| {
                            a.chars().count().cmp(&b.chars().count()).then_with(|| b.cmp(a))
                        }) else {
                            continue;
                        };
                        let label = title_case(&w);
                        let definition = format!("Posts that raise {w}.");
                        (label, definition)
                    }
                };
                if !used.insert(label.to_lowercase()) {
                    continue;
                }
                codes.push(json!({
                    "code": label,
                    "definition": definition,
                    "quote": sentence,
                    "explanation": format!("The passage speaks to {}.", label.to_lowercase()),
                }));
            }
            json!({ "codes": codes })
        }
        ids::CODEBOOK_DEFINITIONS => {
            let codes: Vec<Value> = parse_nested_lines(var(req, "codes"))
                .into_iter()
                .map(|(label, defs)| {
                    let definition = defs
                        .into_iter()
                        .next()
                        .unwrap_or_else(|| format!("Mentions of {label}."));
                    json!({ "code": label, "definition": definition })
                })
                .collect();
            json!({ "codes": codes })
        }
        ids::GLOBAL_CODING => {
            let codebook = parse_nested_lines(var(req, "codebook"));
            let sents = sentences(var(req, "transcript"));
            let mut codes = Vec::new();
            for (label, _) in &codebook {
                let keys: Vec<String> = words(label).collect();
                if keys.is_empty() {
                    continue;
                }
                if let Some(s) = sents
                    .iter()
                    .find(|s| keys.iter().any(|k| s.to_lowercase().contains(k)))
                {
                    codes.push(json!({
                        "code": label,
                        "quote": s,
                        "explanation": format!("Applies {label} to this passage."),
                    }));
                }
            }
            json!({ "codes": codes })
        }
        ids::CLUSTER_CODES => {
            let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for (label, _) in parse_nested_lines(var(req, "codes")) {
                let key = words(&label).next().unwrap_or_else(|| label.to_lowercase());
                groups.entry(key).or_default().push(label);
            }
            let mut clusters: Vec<(String, Vec<String>)> = groups
                .into_iter()
                .map(|(k, members)| (title_case(&k), members))
                .collect();
            if feedback.is_some() && clusters.len() >= 2 {
                let (_, second) = clusters.remove(1);
                clusters[0].1.extend(second);
            }
            let clusters: Vec<Value> = clusters
                .into_iter()
                .map(|(name, codes)| json!({ "reviewed_code": name, "codes": codes }))
                .collect();
            json!({ "clusters": clusters })
        }
        ids::GENERATE_THEMES => {
            let reviewed: Vec<String> = parse_nested_lines(var(req, "reviewed_codes"))
                .into_iter()
                .map(|(l, _)| l)
                .collect();
            let mut themes: Vec<Vec<String>> = reviewed.chunks(3).map(<[String]>::to_vec).collect();
            if feedback.is_some() && themes.len() >= 2 {
                let second = themes.remove(1);
                themes[0].extend(second);
            }
            let themes: Vec<Value> = themes
                .into_iter()
                .map(|members| {
                    let name = match members.as_slice() {
                        [only] => only.clone(),
                        [first, .., last] => format!("{first} and {last}"),
                        [] => unreachable!("chunks are non-empty"),
                    };
                    json!({ "theme": name, "reviewed_codes": members })
                })
                .collect();
            json!({ "themes": themes })
        }
        _ => json!({}),
    }
}
