use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusFilter, Transcript};
use crate::error::{Error, Result};

fn keep(t: &Transcript, f: &CorpusFilter, keyword: Option<&str>) -> bool {
    if f.date_from.is_some_and(|from| t.created_utc < from) {
        return false;
    }
    if f.date_to.is_some_and(|to| t.created_utc >= to) {
        return false;
    }
    if f.drop_empty && t.is_empty_post() {
        return false;
    }
    match keyword {
        Some(k) => t.full_text().to_lowercase().contains(k),
        None => true,
    }
}

/// Returns the transcripts satisfying every present criterion. The input is
/// left untouched.
pub fn apply_filter(corpus: &Corpus, f: &CorpusFilter) -> Result<Corpus> {
    f.validate()?;
    let keyword = f
        .keyword
        .as_deref()
        .filter(|k| !k.is_empty())
        .map(str::to_lowercase);
    let transcripts = corpus
        .transcripts()
        .iter()
        .filter(|t| keep(t, f, keyword.as_deref()))
        .cloned()
        .collect();
    let mut out = Corpus::new(transcripts, corpus.source_descriptor.clone())?;
    out.filter_applied = f.clone();
    out.stats = corpus.stats.clone();
    Ok(out)
}

/// Seeded split into an initial-coding sample and the remainder. Both
/// halves keep corpus order.
pub fn split_corpus(corpus: &Corpus, sample_size: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    if sample_size == 0 || sample_size > corpus.len() {
        return Err(Error::InvalidArgument(format!(
            "sample size {sample_size} outside 1..={}",
            corpus.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: BTreeSet<usize> = index::sample(&mut rng, corpus.len(), sample_size)
        .into_iter()
        .collect();
    let (sample_ids, rest_ids): (BTreeSet<String>, BTreeSet<String>) = {
        let mut s = BTreeSet::new();
        let mut r = BTreeSet::new();
        for (i, t) in corpus.transcripts().iter().enumerate() {
            if chosen.contains(&i) {
                s.insert(t.post_id.clone());
            } else {
                r.insert(t.post_id.clone());
            }
        }
        (s, r)
    };
    Ok((corpus.subset(&sample_ids), corpus.subset(&rest_ids)))
}
