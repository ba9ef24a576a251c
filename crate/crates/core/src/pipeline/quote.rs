//! Verbatim-quote verification against transcript text.

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::ingest::Transcript;

/// NFC, CRLF to LF, whitespace runs collapsed to one space, trimmed.
pub fn normalize_for_match(text: &str) -> String {
    let nfc: String = text.replace("\r\n", "\n").nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    let mut pending_space = false;
    for c in nfc.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

/// A transcript's text, normalized once for repeated lookups.
#[derive(Debug, Clone)]
pub struct QuoteIndex {
    haystack: String,
}

impl QuoteIndex {
    pub fn new(transcript: &Transcript) -> Self {
        QuoteIndex {
            haystack: normalize_for_match(transcript.full_text()),
        }
    }

    pub fn contains(&self, quote: &str) -> Result<bool> {
        let needle = normalize_for_match(quote);
        if needle.is_empty() {
            return Err(Error::InvalidArgument("quote is empty".into()));
        }
        Ok(self.haystack.contains(&needle))
    }
}

pub fn verify_quote(transcript: &Transcript, quote: &str) -> Result<bool> {
    QuoteIndex::new(transcript).contains(quote)
}
