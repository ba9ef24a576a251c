//! Maximum-weight one-to-one matching under a similarity threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair<S> {
    pub predicted: usize,
    pub reference: usize,
    pub similarity: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult<S> {
    /// Sorted by predicted index.
    pub pairs: Vec<MatchedPair<S>>,
    pub unmatched_predicted: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
    pub tau: S,
    pub predicted_len: usize,
    pub reference_len: usize,
}

impl<S: Scalar> MatchResult<S> {
    pub fn total_similarity(&self) -> S {
        self.pairs
            .iter()
            .fold(S::zero(), |acc, p| acc + p.similarity.clone())
    }
}

/// Hungarian method (shortest augmenting paths with potentials) minimising
/// `cost` over a square matrix. Returns the column assigned to each row.
fn hungarian_min<S: Scalar>(cost: &[Vec<S>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-indexed, row/column 0 is the virtual root.
    let mut u = vec![S::zero(); n + 1];
    let mut v = vec![S::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv: Vec<Option<S>> = vec![None; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta: Option<S> = None;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1].clone() - u[i0].clone() - v[j].clone();
                if minv[j].as_ref().is_none_or(|m| cur < *m) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].as_ref().expect("set above");
                if delta.as_ref().is_none_or(|d| *mj < *d) {
                    delta = Some(mj.clone());
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column remains");
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] = u[owner[j]].clone() + delta.clone();
                    v[j] = v[j].clone() - delta.clone();
                } else if let Some(m) = minv[j].as_mut() {
                    *m = m.clone() - delta.clone();
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Optimal injective matching between rows (predicted) and columns
/// (reference) of `similarity`, maximising total similarity over pairs
/// whose similarity is at least `tau`.
pub fn optimal_matching<S: Scalar>(similarity: &[Vec<S>], reference_len: usize, tau: S) -> Result<MatchResult<S>> {
    if !(tau > S::zero() && tau <= S::one()) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1], got {tau:?}")));
    }
    let predicted_len = similarity.len();
    if similarity.iter().any(|row| row.len() != reference_len) {
        return Err(Error::InvalidArgument("similarity matrix is ragged".into()));
    }
    let n = predicted_len.max(reference_len);
    // Edges below tau weigh zero, which is the same as leaving both ends
    // unmatched; padding rows/columns are zero too.
    let cost: Vec<Vec<S>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match similarity.get(i).and_then(|r| r.get(j)) {
                    Some(s) if *s >= tau => S::zero() - s.clone(),
                    _ => S::zero(),
                })
                .collect()
        })
        .collect();
    let assignment = hungarian_min(&cost);
    let mut pairs = Vec::new();
    let mut matched_ref = vec![false; reference_len];
    let mut unmatched_predicted = Vec::new();
    for (i, &j) in assignment.iter().enumerate().take(predicted_len) {
        match similarity[i].get(j) {
            Some(s) if *s >= tau => {
                matched_ref[j] = true;
                pairs.push(MatchedPair {
                    predicted: i,
                    reference: j,
                    similarity: s.clone(),
                });
            }
            _ => unmatched_predicted.push(i),
        }
    }
    let unmatched_reference = matched_ref
        .iter()
        .enumerate()
        .filter(|(_, m)| !**m)
        .map(|(j, _)| j)
        .collect();
    Ok(MatchResult {
        pairs,
        unmatched_predicted,
        unmatched_reference,
        tau,
        predicted_len,
        reference_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn brute_force(sim: &[Vec<f64>], m: usize, tau: f64) -> f64 {
        fn go(i: usize, sim: &[Vec<f64>], used: &mut Vec<bool>, tau: f64) -> f64 {
            if i == sim.len() {
                return 0.0;
            }
            let mut best = go(i + 1, sim, used, tau);
            for j in 0..used.len() {
                if !used[j] && sim[i][j] >= tau {
                    used[j] = true;
                    best = best.max(sim[i][j] + go(i + 1, sim, used, tau));
                    used[j] = false;
                }
            }
            best
        }
        go(0, sim, &mut vec![false; m], tau)
    }

    #[test]
    fn identity_matrix_matches_diagonal() {
        let sim = vec![vec![1.0, 0.1, 0.0], vec![0.1, 1.0, 0.2], vec![0.0, 0.2, 1.0]];
        let r = optimal_matching(&sim, 3, 0.8).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert!(r.pairs.iter().all(|p| p.predicted == p.reference));
        assert!(r.unmatched_predicted.is_empty() && r.unmatched_reference.is_empty());
    }

    #[test]
    fn below_threshold_never_pairs() {
        let sim = vec![vec![0.3, 0.5], vec![0.79, 0.1]];
        let r = optimal_matching(&sim, 2, 0.8).unwrap();
        assert!(r.pairs.is_empty());
        assert_eq!(r.unmatched_predicted, [0, 1]);
        assert_eq!(r.unmatched_reference, [0, 1]);
    }

    #[test]
    fn optimal_beats_greedy() {
        // greedy would take (0,0)=0.95 and leave row 1 unmatched
        let sim: Vec<Vec<f64>> = vec![vec![0.95, 0.9], vec![0.9, 0.1]];
        let r = optimal_matching(&sim, 2, 0.5).unwrap();
        assert!((r.total_similarity() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn rectangular_and_empty() {
        let r = optimal_matching::<f64>(&[], 3, 0.5).unwrap();
        assert_eq!(r.unmatched_reference, [0, 1, 2]);
        let sim = vec![vec![0.9], vec![0.95], vec![0.2]];
        let r = optimal_matching(&sim, 1, 0.5).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].predicted, 1);
        assert!(optimal_matching(&sim, 1, 0.0).is_err());
        assert!(optimal_matching(&sim, 1, 1.5).is_err());
        assert!(optimal_matching(&sim, 2, 0.5).is_err());
    }

    #[test]
    fn exact_rational_arithmetic() {
        let r = |n, d| Ratio::<i64>::new(n, d);
        let sim = vec![vec![r(9, 10), r(4, 5)], vec![r(17, 20), r(1, 10)]];
        let m = optimal_matching(&sim, 2, r(4, 5)).unwrap();
        assert_eq!(m.total_similarity(), r(33, 20));
    }

    proptest! {
        #[test]
        fn equals_exhaustive_search(
            n in 0usize..=6,
            m in 0usize..=6,
            seed in proptest::collection::vec(0.0f64..1.0, 36),
            tau in 0.05f64..1.0,
        ) {
            let sim: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| seed[i * 6 + j]).collect()).collect();
            let r = optimal_matching(&sim, m, tau).unwrap();
            prop_assert!((r.total_similarity() - brute_force(&sim, m, tau)).abs() <= 1e-9);
            let mut seen = std::collections::BTreeSet::new();
            for p in &r.pairs {
                prop_assert!(p.similarity >= tau);
                prop_assert!(seen.insert(p.reference));
            }
            prop_assert_eq!(r.pairs.len() + r.unmatched_predicted.len(), n);
            prop_assert_eq!(r.pairs.len() + r.unmatched_reference.len(), m);
        }
    }
}
