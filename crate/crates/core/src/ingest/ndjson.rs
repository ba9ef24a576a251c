use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{scrub_deleted, Comment, Corpus, IngestStats, Transcript};
use crate::error::{Error, Result};

const ZSTD_MAGIC: [u8; 4] = [0x28, 0xB5, 0x2F, 0xFD];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Submission,
    Comment,
}

/// One parsed dump line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub id: String,
    pub kind: RecordKind,
    pub subreddit: String,
    pub created_utc: i64,
    pub title: Option<String>,
    pub body: String,
    pub parent_id: Option<String>,
    pub link_id: Option<String>,
}

#[derive(Deserialize)]
struct DumpLine {
    id: Option<String>,
    subreddit: Option<String>,
    created_utc: Option<Value>,
    title: Option<String>,
    selftext: Option<String>,
    body: Option<String>,
    parent_id: Option<String>,
    link_id: Option<String>,
}

fn epoch_seconds(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s.trim().parse::<i64>().ok().or_else(|| {
            s.trim().parse::<f64>().ok().map(|f| f as i64)
        }),
        _ => None,
    }
}

fn strip_kind_prefix(id: &str) -> &str {
    id.strip_prefix("t3_")
        .or_else(|| id.strip_prefix("t1_"))
        .unwrap_or(id)
}

impl RawRecord {
    /// Parses a single line. `None` means the line is malformed.
    pub fn parse_line(line: &[u8]) -> Option<RawRecord> {
        let raw: DumpLine = serde_json::from_slice(line).ok()?;
        let id = raw.id.filter(|s| !s.is_empty())?;
        let subreddit = raw.subreddit?;
        let created_utc = epoch_seconds(raw.created_utc.as_ref()?)?;
        if let Some(title) = raw.title {
            return Some(RawRecord {
                id,
                kind: RecordKind::Submission,
                subreddit,
                created_utc,
                title: Some(title),
                body: raw.selftext.unwrap_or_default(),
                parent_id: None,
                link_id: None,
            });
        }
        let link_id = raw.link_id.map(|l| strip_kind_prefix(&l).to_string())?;
        Some(RawRecord {
            id,
            kind: RecordKind::Comment,
            subreddit,
            created_utc,
            title: None,
            body: raw.body.unwrap_or_default(),
            parent_id: raw.parent_id,
            link_id: Some(link_id),
        })
    }
}

/// Loads a plain or zstd-compressed NDJSON dump, keeping only `subreddit`
/// (case-insensitive).
pub fn load_ndjson(path: &Path, subreddit: &str) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    let compressed = head.starts_with(&ZSTD_MAGIC);
    let descriptor = format!("ndjson:{}#r/{}", path.display(), subreddit);
    if compressed {
        let mut decoder = zstd::stream::read::Decoder::with_buffer(reader)
            .map_err(|e| Error::io(path, e))?;
        // Reddit archives are written with --long=31.
        decoder
            .window_log_max(31)
            .map_err(|e| Error::io(path, e))?;
        parse_ndjson(BufReader::new(decoder), subreddit, descriptor)
            .map_err(|e| with_path(e, path))
    } else {
        parse_ndjson(reader, subreddit, descriptor).map_err(|e| with_path(e, path))
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

type Candidate = (i64, String, String);

/// Streams records from any line reader into a corpus.
pub fn parse_ndjson<R: Read>(
    reader: BufReader<R>,
    subreddit: &str,
    source_descriptor: impl Into<String>,
) -> Result<Corpus> {
    let wanted = subreddit.to_lowercase();
    let mut stats = IngestStats::default();
    let mut parsable = 0u64;
    // id -> (created, title, body); duplicates resolved to the smallest tuple
    // so line order never matters.
    let mut submissions: BTreeMap<String, (i64, String, String)> = BTreeMap::new();
    let mut comments: BTreeMap<String, (String, Candidate)> = BTreeMap::new();

    let mut reader = reader;
    let mut line = Vec::with_capacity(4096);
    loop {
        line.clear();
        let n = reader
            .read_until(b'\n', &mut line)
            .map_err(|e| Error::io("<stream>", e))?;
        if n == 0 {
            break;
        }
        stats.lines_read += 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            stats.blank_lines += 1;
            continue;
        }
        let Some(record) = RawRecord::parse_line(&line) else {
            stats.malformed_lines += 1;
            continue;
        };
        parsable += 1;
        if record.subreddit.to_lowercase() != wanted {
            continue;
        }
        stats.matched_records += 1;
        let body = scrub_deleted(&record.body).to_string();
        match record.kind {
            RecordKind::Submission => {
                let cand = (record.created_utc, record.title.unwrap_or_default(), body);
                match submissions.entry(record.id) {
                    Entry::Vacant(v) => {
                        v.insert(cand);
                    }
                    Entry::Occupied(mut o) => {
                        stats.duplicate_records += 1;
                        if cand < *o.get() {
                            o.insert(cand);
                        }
                    }
                }
            }
            RecordKind::Comment => {
                let link = record.link_id.unwrap_or_default();
                let cand = (link, (record.created_utc, body, String::new()));
                match comments.entry(record.id) {
                    Entry::Vacant(v) => {
                        v.insert(cand);
                    }
                    Entry::Occupied(mut o) => {
                        stats.duplicate_records += 1;
                        if cand < *o.get() {
                            o.insert(cand);
                        }
                    }
                }
            }
        }
    }

    if parsable == 0 {
        return Err(Error::EmptyInput(format!(
            "no parsable records ({} lines, {} malformed)",
            stats.lines_read, stats.malformed_lines
        )));
    }

    let mut by_post: BTreeMap<String, Vec<Comment>> = BTreeMap::new();
    for (comment_id, (link, (created_utc, text, _))) in comments {
        if !submissions.contains_key(&link) {
            stats.orphan_comments += 1;
            continue;
        }
        if text.trim().is_empty() {
            continue;
        }
        by_post.entry(link).or_default().push(Comment {
            comment_id,
            text,
            created_utc,
        });
    }

    let transcripts = submissions
        .into_iter()
        .map(|(post_id, (created_utc, title, body))| {
            let comments = by_post.remove(&post_id).unwrap_or_default();
            Transcript::new(post_id, title, body, comments, created_utc)
        })
        .collect();
    let mut corpus = Corpus::new(transcripts, source_descriptor)?;
    corpus.stats = stats;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, sub: &str) -> Result<Corpus> {
        parse_ndjson(BufReader::new(text.as_bytes()), sub, "test")
    }

    #[test]
    fn filters_by_subreddit_and_attaches_comments() {
        let input = r#"{"id":"s1","subreddit":"a","created_utc":10,"title":"T","selftext":"body"}
{"id":"c1","subreddit":"A","created_utc":11,"body":"reply","link_id":"t3_s1","parent_id":"t3_s1"}
{"id":"s2","subreddit":"b","created_utc":12,"title":"Other","selftext":"x"}
"#;
        let corpus = parse(input, "a").unwrap();
        assert_eq!(corpus.len(), 1);
        let t = &corpus.transcripts()[0];
        assert_eq!(t.post_id, "s1");
        assert_eq!(t.comments().len(), 1);
        assert_eq!(t.full_text(), "T\nbody\nreply");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(parse("", "a"), Err(Error::EmptyInput(_))));
        assert!(matches!(parse("\n\nnot json\n", "a"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn malformed_lines_are_counted_and_skipped() {
        let input = "{\"id\":\"s1\",\"subreddit\":\"a\",\"created_utc\":\"10\",\"title\":\"T\"}\n{broken\n{\"id\":\"x\"}\n";
        let corpus = parse(input, "a").unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.stats.malformed_lines, 2);
        assert_eq!(corpus.transcripts()[0].created_utc, 10);
    }

    #[test]
    fn comment_without_link_is_malformed_and_orphans_are_dropped() {
        let input = r#"{"id":"c0","subreddit":"a","created_utc":1,"body":"no link"}
{"id":"c1","subreddit":"a","created_utc":1,"body":"orphan","link_id":"t3_zz"}
{"id":"s1","subreddit":"a","created_utc":1,"title":"T","selftext":"[deleted]"}
"#;
        let corpus = parse(input, "a").unwrap();
        assert_eq!(corpus.stats.malformed_lines, 1);
        assert_eq!(corpus.stats.orphan_comments, 1);
        assert_eq!(corpus.transcripts()[0].body, "");
    }

    #[test]
    fn zstd_input_is_detected() {
        let input = r#"{"id":"s1","subreddit":"a","created_utc":10,"title":"T","selftext":"body"}"#;
        let compressed = zstd::encode_all(input.as_bytes(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.zst");
        std::fs::write(&path, compressed).unwrap();
        let corpus = load_ndjson(&path, "a").unwrap();
        assert_eq!(corpus.len(), 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_ndjson(Path::new("/nonexistent/dump.ndjson"), "a"),
            Err(Error::Io { .. })
        ));
    }
}
