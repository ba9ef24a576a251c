//! Serializable agreement reports over labels, per-post codings and
//! partitions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{clustering_macro_f1, match_sets, prf_from_counts, true_positive_mass, weighted_prf, ClusteringAgreement, PrfMode, PrfScore};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::llm::Embedder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchView {
    pub predicted: String,
    pub reference: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetAgreement {
    pub tau: f64,
    pub mode: PrfMode,
    pub score: PrfScore<f64>,
    pub matches: Vec<MatchView>,
    pub unmatched_predicted: Vec<String>,
    pub unmatched_reference: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingAgreement {
    pub tau: f64,
    pub mode: PrfMode,
    /// Micro-aggregated over posts, so each post weighs by its number of
    /// assignments.
    pub score: PrfScore<f64>,
    pub per_post: BTreeMap<String, SetAgreement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionAgreement {
    pub score: ClusteringAgreement<f64>,
    /// Items present on only one side, left out of the comparison.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded_items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgreementReport {
    Set(SetAgreement),
    Coding(CodingAgreement),
    Partition(PartitionAgreement),
}

impl AgreementReport {
    /// The headline number: F1 for sets and codings, macro F1 for
    /// partitions.
    pub fn headline(&self) -> f64 {
        match self {
            AgreementReport::Set(s) => s.score.f1,
            AgreementReport::Coding(c) => c.score.f1,
            AgreementReport::Partition(p) => p.score.macro_f1,
        }
    }
}

pub fn eval_set(predicted: &[String], reference: &[String], tau: f64, mode: PrfMode, embedder: &dyn Embedder) -> Result<SetAgreement> {
    let m = match_sets(predicted, reference, tau, embedder)?;
    Ok(SetAgreement {
        tau,
        mode,
        score: weighted_prf(&m, mode),
        matches: m
            .pairs
            .iter()
            .map(|p| MatchView {
                predicted: predicted[p.predicted].clone(),
                reference: reference[p.reference].clone(),
                similarity: p.similarity,
            })
            .collect(),
        unmatched_predicted: m.unmatched_predicted.iter().map(|&i| predicted[i].clone()).collect(),
        unmatched_reference: m.unmatched_reference.iter().map(|&i| reference[i].clone()).collect(),
    })
}

pub fn eval_coding(
    predicted: &BTreeMap<String, Vec<String>>,
    reference: &BTreeMap<String, Vec<String>>,
    tau: f64,
    mode: PrfMode,
    embedder: &dyn Embedder,
) -> Result<CodingAgreement> {
    let posts: BTreeSet<&String> = predicted.keys().chain(reference.keys()).collect();
    let empty = Vec::new();
    let mut per_post = BTreeMap::new();
    let (mut tp, mut np, mut nr) = (0.0, 0, 0);
    for post in posts {
        let p = predicted.get(post).unwrap_or(&empty);
        let r = reference.get(post).unwrap_or(&empty);
        let m = match_sets(p, r, tau, embedder)?;
        tp += true_positive_mass(&m, mode);
        np += p.len();
        nr += r.len();
        per_post.insert(post.clone(), eval_set(p, r, tau, mode, embedder)?);
    }
    Ok(CodingAgreement {
        tau,
        mode,
        score: prf_from_counts(tp, np, nr, mode),
        per_post,
    })
}

/// Macro F1 over the items both partitions share.
pub fn eval_partition(predicted: &[Vec<String>], reference: &[Vec<String>]) -> Result<PartitionAgreement> {
    let p_items: BTreeSet<&String> = predicted.iter().flatten().collect();
    let r_items: BTreeSet<&String> = reference.iter().flatten().collect();
    let shared: BTreeSet<&String> = p_items.intersection(&r_items).copied().collect();
    let excluded_items = p_items.symmetric_difference(&r_items).map(|s| s.to_string()).collect();
    let restrict = |part: &[Vec<String>]| -> Vec<Vec<String>> {
        part.iter()
            .map(|g| g.iter().filter(|i| shared.contains(i)).cloned().collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect()
    };
    Ok(PartitionAgreement {
        score: clustering_macro_f1(&restrict(predicted), &restrict(reference))?,
        excluded_items,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    Set,
    Coding,
    Partition,
}

impl std::str::FromStr for EvalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "set" | "labels" => Ok(EvalKind::Set),
            "coding" => Ok(EvalKind::Coding),
            "partition" | "clusters" | "themes" => Ok(EvalKind::Partition),
            other => Err(Error::InvalidArgument(format!("unknown evaluation kind {other:?}"))),
        }
    }
}

fn strings(v: &Value, what: &str) -> Result<Vec<String>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidArgument(format!("{what}: expected an array of strings")))?
        .iter()
        .map(|x| {
            x.as_str()
                .map(String::from)
                .ok_or_else(|| Error::InvalidArgument(format!("{what}: expected an array of strings")))
        })
        .collect()
}

/// Partition JSON: a list of groups, `{group: [items]}`, or `{item: group}`.
pub fn partition_from_json(v: &Value, what: &str) -> Result<Vec<Vec<String>>> {
    match v {
        Value::Array(groups) => groups.iter().map(|g| strings(g, what)).collect(),
        Value::Object(map) if map.values().all(Value::is_string) => {
            let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
            for (item, g) in map {
                groups.entry(g.as_str().unwrap_or_default()).or_default().push(item.clone());
            }
            Ok(groups.into_values().collect())
        }
        Value::Object(map) => map.values().map(|g| strings(g, what)).collect(),
        _ => Err(Error::InvalidArgument(format!("{what}: expected a partition"))),
    }
}

/// Scores two JSON documents of the given kind. Sets are string arrays,
/// codings map post ids to label arrays.
pub fn evaluate_json(
    kind: EvalKind,
    predicted: &Value,
    reference: &Value,
    tau: f64,
    mode: PrfMode,
    embedder: &dyn Embedder,
) -> Result<AgreementReport> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside [0, 1]")));
    }
    let coding = |v: &Value, what: &str| -> Result<BTreeMap<String, Vec<String>>> {
        v.as_object()
            .ok_or_else(|| Error::InvalidArgument(format!("{what}: expected an object of post id to labels")))?
            .iter()
            .map(|(k, v)| Ok((k.clone(), strings(v, what)?)))
            .collect()
    };
    Ok(match kind {
        EvalKind::Set => AgreementReport::Set(eval_set(
            &strings(predicted, "predicted")?,
            &strings(reference, "reference")?,
            tau,
            mode,
            embedder,
        )?),
        EvalKind::Coding => AgreementReport::Coding(eval_coding(
            &coding(predicted, "predicted")?,
            &coding(reference, "reference")?,
            tau,
            mode,
            embedder,
        )?),
        EvalKind::Partition => AgreementReport::Partition(eval_partition(
            &partition_from_json(predicted, "predicted")?,
            &partition_from_json(reference, "reference")?,
        )?),
    })
}
