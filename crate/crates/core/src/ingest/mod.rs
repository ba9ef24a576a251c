//! Reddit dump and plain-text ingestion.
//!
//! A [`Corpus`] is an immutable, ordered set of [`Transcript`]s: one
//! submission plus its flattened comments. Ordering is ascending
//! `created_utc` with ties broken by `post_id`, so the same input always
//! yields the same corpus regardless of line order.

mod filter;
mod ndjson;
mod textfiles;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{apply_filter, split_corpus};
pub use ndjson::{load_ndjson, parse_ndjson, RawRecord, RecordKind};
pub use textfiles::load_textfiles;

/// Markers Reddit substitutes for removed content.
const DELETED_MARKERS: [&str; 2] = ["[deleted]", "[removed]"];

pub(crate) fn scrub_deleted(text: &str) -> &str {
    if DELETED_MARKERS.contains(&text.trim()) {
        ""
    } else {
        text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub text: String,
    pub created_utc: i64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptParts {
    post_id: String,
    title: String,
    body: String,
    comments: Vec<Comment>,
    created_utc: i64,
    #[serde(default)]
    full_text: Option<String>,
}

/// One submission and its comments, the unit of coding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TranscriptParts")]
pub struct Transcript {
    pub post_id: String,
    pub title: String,
    pub body: String,
    comments: Vec<Comment>,
    pub created_utc: i64,
    full_text: String,
}

impl TryFrom<TranscriptParts> for Transcript {
    type Error = String;

    fn try_from(parts: TranscriptParts) -> std::result::Result<Self, Self::Error> {
        let stored = parts.full_text.clone();
        let transcript = Transcript::new(
            parts.post_id,
            parts.title,
            parts.body,
            parts.comments,
            parts.created_utc,
        );
        match stored {
            Some(text) if text != transcript.full_text => Err(format!(
                "stored full_text of {} does not match its parts",
                transcript.post_id
            )),
            _ => Ok(transcript),
        }
    }
}

impl Transcript {
    pub fn new(
        post_id: String,
        title: String,
        body: String,
        mut comments: Vec<Comment>,
        created_utc: i64,
    ) -> Self {
        comments.sort_by(|a, b| {
            a.created_utc
                .cmp(&b.created_utc)
                .then_with(|| a.comment_id.cmp(&b.comment_id))
        });
        let full_text = assemble_full_text(&title, &body, &comments);
        Transcript {
            post_id,
            title,
            body,
            comments,
            created_utc,
            full_text,
        }
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    /// Title, body and comments joined by single newlines.
    pub fn full_text(&self) -> &str {
        &self.full_text
    }

    /// Body and every comment are whitespace-only (deleted markers count as
    /// empty).
    pub fn is_empty_post(&self) -> bool {
        scrub_deleted(&self.body).trim().is_empty()
            && self
                .comments
                .iter()
                .all(|c| scrub_deleted(&c.text).trim().is_empty())
    }
}

pub(crate) fn assemble_full_text(title: &str, body: &str, comments: &[Comment]) -> String {
    let mut out = String::with_capacity(
        title.len() + body.len() + comments.iter().map(|c| c.text.len() + 1).sum::<usize>() + 1,
    );
    out.push_str(title);
    out.push('\n');
    out.push_str(body);
    for c in comments {
        out.push('\n');
        out.push_str(&c.text);
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFilter {
    /// Inclusive lower bound, epoch seconds.
    #[serde(default)]
    pub date_from: Option<i64>,
    /// Exclusive upper bound, epoch seconds.
    #[serde(default)]
    pub date_to: Option<i64>,
    #[serde(default)]
    pub keyword: Option<String>,
    #[serde(default)]
    pub drop_empty: bool,
}

impl CorpusFilter {
    pub fn validate(&self) -> Result<()> {
        if let (Some(from), Some(to)) = (self.date_from, self.date_to) {
            if from >= to {
                return Err(Error::InvalidFilter(format!(
                    "date_from ({from}) must be earlier than date_to ({to})"
                )));
            }
        }
        Ok(())
    }

    pub fn is_noop(&self) -> bool {
        self.date_from.is_none()
            && self.date_to.is_none()
            && self.keyword.as_deref().is_none_or(str::is_empty)
            && !self.drop_empty
    }
}

/// Counters collected while reading a dump.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub lines_read: u64,
    pub blank_lines: u64,
    pub malformed_lines: u64,
    pub matched_records: u64,
    pub orphan_comments: u64,
    pub duplicate_records: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    transcripts: Vec<Transcript>,
    pub source_descriptor: String,
    #[serde(default)]
    pub filter_applied: CorpusFilter,
    #[serde(default)]
    pub stats: IngestStats,
}

impl Corpus {
    /// Sorts transcripts into canonical order and rejects duplicate ids.
    pub fn new(mut transcripts: Vec<Transcript>, source_descriptor: impl Into<String>) -> Result<Self> {
        sort_transcripts(&mut transcripts);
        let mut seen = BTreeSet::new();
        for t in &transcripts {
            if !seen.insert(t.post_id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate post_id {}", t.post_id)));
            }
        }
        Ok(Corpus {
            transcripts,
            source_descriptor: source_descriptor.into(),
            filter_applied: CorpusFilter::default(),
            stats: IngestStats::default(),
        })
    }

    pub fn transcripts(&self) -> &[Transcript] {
        &self.transcripts
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }

    pub fn get(&self, post_id: &str) -> Option<&Transcript> {
        self.transcripts
            .iter()
            .find(|t| t.post_id == post_id)
    }

    pub fn post_ids(&self) -> impl Iterator<Item = &str> {
        self.transcripts.iter().map(|t| t.post_id.as_str())
    }

    /// Sub-corpus holding the given ids, in corpus order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Corpus {
        Corpus {
            transcripts: self
                .transcripts
                .iter()
                .filter(|t| ids.contains(&t.post_id))
                .cloned()
                .collect(),
            source_descriptor: self.source_descriptor.clone(),
            filter_applied: self.filter_applied.clone(),
            stats: self.stats.clone(),
        }
    }

    /// One JSON object per line, canonical order.
    pub fn to_ndjson(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.transcripts {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_ndjson(text: &str, source_descriptor: impl Into<String>) -> Result<Corpus> {
        let transcripts = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<Transcript>(l).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(transcripts, source_descriptor)
    }
}

pub(crate) fn sort_transcripts(transcripts: &mut [Transcript]) {
    transcripts.sort_by(|a, b| {
        a.created_utc
            .cmp(&b.created_utc)
            .then_with(|| a.post_id.cmp(&b.post_id))
    });
}
