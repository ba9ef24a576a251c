use serde::{Deserialize, Serialize};

use super::assignment::MatchResult;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrfMode {
    /// Each matched pair counts as one true positive.
    #[default]
    Hard,
    /// Each matched pair contributes its similarity.
    #[serde(alias = "weighted")]
    SimilarityWeighted,
}

impl std::str::FromStr for PrfMode {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard" => Ok(PrfMode::Hard),
            "weighted" | "similarity_weighted" => Ok(PrfMode::SimilarityWeighted),
            other => Err(crate::error::Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfScore<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
    pub mode: PrfMode,
}

/// Harmonic mean, zero when both inputs are zero.
pub fn f1_of<S: Scalar>(precision: &S, recall: &S) -> S {
    let sum = precision.clone() + recall.clone();
    if sum == S::zero() {
        S::zero()
    } else {
        S::two() * precision.clone() * recall.clone() / sum
    }
}

/// Precision/recall/F1 from a true-positive mass and the two set sizes.
/// Two empty sets agree perfectly.
pub fn prf_from_counts<S: Scalar>(true_positive: S, predicted: usize, reference: usize, mode: PrfMode) -> PrfScore<S> {
    if predicted == 0 && reference == 0 {
        return PrfScore {
            precision: S::one(),
            recall: S::one(),
            f1: S::one(),
            mode,
        };
    }
    let ratio = |den: usize| {
        if den == 0 {
            S::zero()
        } else {
            true_positive.clone() / S::from_count(den)
        }
    };
    let precision = ratio(predicted);
    let recall = ratio(reference);
    let f1 = f1_of(&precision, &recall);
    PrfScore {
        precision,
        recall,
        f1,
        mode,
    }
}

pub fn true_positive_mass<S: Scalar>(m: &MatchResult<S>, mode: PrfMode) -> S {
    match mode {
        PrfMode::Hard => S::from_count(m.pairs.len()),
        PrfMode::SimilarityWeighted => m.total_similarity(),
    }
}

pub fn weighted_prf<S: Scalar>(m: &MatchResult<S>, mode: PrfMode) -> PrfScore<S> {
    prf_from_counts(true_positive_mass(m, mode), m.predicted_len, m.reference_len, mode)
}
