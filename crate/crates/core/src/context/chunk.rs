use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default chunk length in characters.
pub const DEFAULT_CHUNK_CHARS: usize = 1_000;
/// Default overlap between consecutive chunks in characters.
pub const DEFAULT_OVERLAP_CHARS: usize = 200;

/// Half-open character range `[start, end)` into a source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Splits `text` into windows of at most `chunk_chars` characters; each
/// window after the first starts `overlap_chars` before the previous end.
pub fn chunk_text(text: &str, chunk_chars: usize, overlap_chars: usize) -> Result<Vec<Span>> {
    if chunk_chars == 0 || overlap_chars >= chunk_chars {
        return Err(Error::InvalidArgument(format!(
            "overlap ({overlap_chars}) must be smaller than chunk size ({chunk_chars})"
        )));
    }
    let len = text.chars().count();
    let mut spans = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + chunk_chars).min(len);
        spans.push(Span { start, end });
        if end == len {
            break;
        }
        start = end - overlap_chars;
    }
    Ok(spans)
}

/// Extracts the characters covered by `span`.
pub fn span_text(text: &str, span: Span) -> String {
    text.chars().skip(span.start).take(span.len()).collect()
}
