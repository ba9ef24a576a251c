//! Fuzzed quote verification against a naive normalized search.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taforge_core::ingest::{Comment, Transcript};
use taforge_core::pipeline::verify_quote;
use unicode_normalization::UnicodeNormalization;

use crate::Outcome;

const WORDS: &[&str] = &[
    "clinic", "pharmacy", "insurance", "wait", "doctor", "coverage", "refill", "appointment", "copay", "year",
    "the", "a", "and", "my", "for", "never", "again", "it's", "don't", "co-pay", "nurse", "bill", "$40", "3pm",
    "café", "naïve", "résumé", "señora", "zoë", "über", "façade", "Ångström",
];

const SEPARATORS: &[&str] = &[" ", "  ", "\t", "\n", "\r\n", "\u{00A0}", "\u{2003}", " \n\t "];

const TRANSCRIPTS: usize = 400;
const LIMIT_SECS: f64 = 5.0;

/// Shapes one token: accented words come out composed or decomposed.
fn spell(word: &str, rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.5) {
        word.nfd().collect()
    } else {
        word.nfc().collect()
    }
}

fn join(tokens: &[&str], rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push_str(SEPARATORS.choose(rng).unwrap());
        }
        out.push_str(&spell(t, rng));
    }
    out
}

fn words<'a>(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<&'a str> {
    let n = rng.random_range(lo..=hi);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect()
}

fn oracle_normalize(s: &str) -> String {
    let composed: String = s.nfc().collect();
    composed.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn naive_find(haystack: &str, quote: &str) -> bool {
    let h: Vec<char> = oracle_normalize(haystack).chars().collect();
    let n: Vec<char> = oracle_normalize(quote).chars().collect();
    if n.is_empty() || n.len() > h.len() {
        return false;
    }
    (0..=h.len() - n.len()).any(|i| h[i..i + n.len()] == n[..])
}

/// A word that cannot occur in the vocabulary.
fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    let at = rng.random_range(0..=chars.len());
    let mut out: String = chars[..at].iter().collect();
    out.push('q');
    out.extend(&chars[at..]);
    out
}

fn capitalized(word: &str) -> Option<String> {
    let mut cs = word.chars();
    let first = cs.next()?;
    let upper: String = first.to_uppercase().collect();
    (upper != first.to_string()).then(|| upper + cs.as_str())
}

struct Case {
    quote: String,
    /// What construction says: a true substring or a mutation.
    genuine: bool,
    /// Mutations guaranteed absent from the transcript.
    certain: bool,
}

fn cases(tokens: &[&str], normalized: &str, rng: &mut ChaCha8Rng) -> Vec<Case> {
    let mut out = Vec::new();
    let span = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(1..=tokens.len().min(12));
        let start = rng.random_range(0..=tokens.len() - len);
        tokens[start..start + len].to_vec()
    };
    for _ in 0..2 {
        let s = span(rng);
        out.push(Case { quote: join(&s, rng), genuine: true, certain: true });
    }
    // A raw character window, possibly cutting words.
    let chars: Vec<char> = normalized.chars().collect();
    loop {
        let a = rng.random_range(0..chars.len());
        let b = rng.random_range(a + 1..=chars.len().min(a + 60));
        let window: String = chars[a..b].iter().collect();
        if !window.trim().is_empty() {
            out.push(Case { quote: window, genuine: true, certain: true });
            break;
        }
    }
    for kind in 0..3 {
        let mut s: Vec<String> = span(rng).iter().map(|t| t.to_string()).collect();
        let i = rng.random_range(0..s.len());
        let certain = match kind {
            0 => {
                s[i] = typo(&s[i], rng);
                true
            }
            1 => match capitalized(&s[i]) {
                Some(c) => {
                    s[i] = c;
                    true
                }
                None => {
                    s[i] = typo(&s[i], rng);
                    true
                }
            },
            _ => {
                // Swap in another vocabulary word; may coincide with text
                // elsewhere, so only the oracle decides.
                s[i] = WORDS.choose(rng).unwrap().to_string();
                false
            }
        };
        let refs: Vec<&str> = s.iter().map(String::as_str).collect();
        out.push(Case { quote: join(&refs, rng), genuine: false, certain });
    }
    out
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x51_07e5);
    let (mut pairs, mut accepted, mut rejected) = (0usize, 0usize, 0usize);
    let (mut false_accepts, mut false_rejects, mut mislabelled) = (0usize, 0usize, 0usize);
    let mut first_problem = None;
    for n in 0..TRANSCRIPTS {
        let title = words(&mut rng, 3, 8);
        let body = words(&mut rng, 10, 40);
        let comments: Vec<Vec<&str>> = (0..rng.random_range(0..=3)).map(|_| words(&mut rng, 5, 20)).collect();
        let transcript = Transcript::new(
            format!("q{n:04}"),
            join(&title, &mut rng),
            join(&body, &mut rng),
            comments
                .iter()
                .enumerate()
                .map(|(i, c)| Comment {
                    comment_id: format!("q{n:04}c{i}"),
                    text: join(c, &mut rng),
                    created_utc: i as i64,
                })
                .collect(),
            0,
        );
        let mut tokens = title.clone();
        tokens.extend(&body);
        for c in &comments {
            tokens.extend(c);
        }
        let normalized = oracle_normalize(transcript.full_text());
        for case in cases(&tokens, &normalized, &mut rng) {
            pairs += 1;
            let truth = naive_find(transcript.full_text(), &case.quote);
            let verdict = verify_quote(&transcript, &case.quote).unwrap_or(false);
            if verdict {
                accepted += 1;
            } else {
                rejected += 1;
            }
            if case.certain && truth != case.genuine {
                mislabelled += 1;
            }
            if verdict && !truth {
                false_accepts += 1;
            }
            if !verdict && truth {
                false_rejects += 1;
            }
            if (verdict != truth || (case.certain && truth != case.genuine)) && first_problem.is_none() {
                first_problem = Some(format!("{:?} in {}", case.quote, transcript.post_id));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let summary = format!(
        "{pairs} pairs ({accepted} accepted, {rejected} rejected), {false_accepts} false accepts, \
         {false_rejects} false rejects, {secs:.2} s (limit {LIMIT_SECS} s)"
    );
    if pairs < 1000 || false_accepts + false_rejects + mislabelled > 0 || secs >= LIMIT_SECS {
        return Err(format!(
            "{summary}; {mislabelled} generator mislabels; first problem {}",
            first_problem.unwrap_or_default()
        ));
    }
    Ok(summary)
}
