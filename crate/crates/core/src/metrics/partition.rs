//! Pairwise co-membership agreement between two partitions.
//!
//! Every unordered pair of items is labelled *same* or *different* under
//! each partition. Treating the reference as ground truth gives one F1 per
//! class; the macro score is their mean. A class absent from both
//! partitions scores 1, a class present in only one scores 0.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringAgreement<S> {
    pub macro_f1: S,
    pub same_pair_f1: S,
    pub different_pair_f1: S,
    pub item_count: usize,
}

fn pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn class_f1<S: Scalar>(tp: usize, predicted: usize, reference: usize) -> S {
    if predicted == 0 && reference == 0 {
        S::one()
    } else {
        S::from_count(2 * tp) / S::from_count(predicted + reference)
    }
}

fn labels<T: Ord + Clone + std::fmt::Debug>(partition: &[Vec<T>], side: &str) -> Result<BTreeMap<T, usize>> {
    let mut out = BTreeMap::new();
    for (cluster, members) in partition.iter().enumerate() {
        for item in members {
            if out.insert(item.clone(), cluster).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "{side} partition lists {item:?} more than once"
                )));
            }
        }
    }
    Ok(out)
}

/// Counts via the contingency table, O(n + clusters²).
pub fn clustering_macro_f1<T, S>(predicted: &[Vec<T>], reference: &[Vec<T>]) -> Result<ClusteringAgreement<S>>
where
    T: Ord + Clone + std::fmt::Debug,
    S: Scalar,
{
    let pred = labels(predicted, "predicted")?;
    let reference = labels(reference, "reference")?;
    if !pred.keys().eq(reference.keys()) {
        let a: BTreeSet<_> = pred.keys().collect();
        let b: BTreeSet<_> = reference.keys().collect();
        let diff: Vec<_> = a.symmetric_difference(&b).take(5).collect();
        return Err(Error::InvalidArgument(format!(
            "partitions cover different items, e.g. {diff:?}"
        )));
    }
    let n = pred.len();
    let mut pred_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut ref_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (item, &p) in &pred {
        let r = reference[item];
        *pred_sizes.entry(p).or_default() += 1;
        *ref_sizes.entry(r).or_default() += 1;
        *joint.entry((p, r)).or_default() += 1;
    }
    let total = pairs(n);
    let pred_same: usize = pred_sizes.values().map(|&c| pairs(c)).sum();
    let ref_same: usize = ref_sizes.values().map(|&c| pairs(c)).sum();
    let both_same: usize = joint.values().map(|&c| pairs(c)).sum();
    let pred_diff = total - pred_same;
    let ref_diff = total - ref_same;
    let both_diff = total + both_same - pred_same - ref_same;

    let same_pair_f1: S = class_f1(both_same, pred_same, ref_same);
    let different_pair_f1: S = class_f1(both_diff, pred_diff, ref_diff);
    let macro_f1 = (same_pair_f1.clone() + different_pair_f1.clone()) / S::two();
    Ok(ClusteringAgreement {
        macro_f1,
        same_pair_f1,
        different_pair_f1,
        item_count: n,
    })
}
