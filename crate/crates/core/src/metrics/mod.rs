//! Agreement metrics between machine proposals and human references.

mod agreement;
mod assignment;
mod partition;
mod prf;

pub use agreement::{evaluate_json, partition_from_json, EvalKind, eval_coding, eval_partition, eval_set, AgreementReport, CodingAgreement, MatchView, PartitionAgreement, SetAgreement};
pub use assignment::{optimal_matching, MatchResult, MatchedPair};
pub use partition::{clustering_macro_f1, ClusteringAgreement};
pub use prf::{f1_of, prf_from_counts, true_positive_mass, weighted_prf, PrfMode, PrfScore};

use crate::context::cosine_similarity;
use crate::error::{Error, Result};
use crate::llm::Embedder;

pub const DEFAULT_TAU: f64 = 0.8;

/// Cosine similarity matrix between two text lists, rows = `predicted`.
pub fn similarity_matrix(predicted: &[String], reference: &[String], embedder: &dyn Embedder) -> Result<Vec<Vec<f64>>> {
    if predicted.is_empty() || reference.is_empty() {
        return Ok(vec![Vec::new(); predicted.len()]);
    }
    let mut all = predicted.to_vec();
    all.extend_from_slice(reference);
    let vectors = embedder.embed(&all)?;
    let (p, r) = vectors.split_at(predicted.len());
    p.iter()
        .map(|a| r.iter().map(|b| cosine_similarity(a, b)).collect())
        .collect()
}

/// Optimal one-to-one matching of two text sets by embedding similarity.
pub fn match_sets(predicted: &[String], reference: &[String], tau: f64, embedder: &dyn Embedder) -> Result<MatchResult<f64>> {
    let sim = similarity_matrix(predicted, reference, embedder)?;
    optimal_matching(&sim, reference.len(), tau)
}

/// Mean cosine similarity of definitions aligned by position.
pub fn definition_similarity(defs_a: &[String], defs_b: &[String], embedder: &dyn Embedder) -> Result<f64> {
    if defs_a.len() != defs_b.len() {
        return Err(Error::InvalidArgument(format!(
            "definition lists differ in length ({} vs {})",
            defs_a.len(),
            defs_b.len()
        )));
    }
    if defs_a.is_empty() {
        return Err(Error::InvalidArgument("no definitions to compare".into()));
    }
    let mut all = defs_a.to_vec();
    all.extend_from_slice(defs_b);
    let vectors = embedder.embed(&all)?;
    let (a, b) = vectors.split_at(defs_a.len());
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        total += cosine_similarity(x, y)?;
    }
    Ok(total / defs_a.len() as f64)
}
