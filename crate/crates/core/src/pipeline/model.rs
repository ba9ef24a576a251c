//! Phase payloads and the domain records they hold.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::buckets::BucketSet;
use crate::ingest::CorpusFilter;
use crate::llm::{ModelResponse, ProviderId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_id: String,
    pub label: String,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineEntry {
    pub concept_id: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    pub code_id: String,
    pub label: String,
    pub definition: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Initial,
    Global,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeApplication {
    pub application_id: String,
    pub post_id: String,
    pub code_id: String,
    pub quote: String,
    pub explanation: String,
    pub verified: bool,
    pub origin: Origin,
}

/// Provenance of one model answer kept with the payload it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub template_id: String,
    pub template_version: String,
    pub provider_id: ProviderId,
    pub model_name: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_id: Option<String>,
}

impl CallRecord {
    pub(crate) fn of(template_id: &str, r: &ModelResponse, post_id: Option<&str>) -> Self {
        CallRecord {
            template_id: template_id.to_string(),
            template_version: r.template_version.clone(),
            provider_id: r.provider_id,
            model_name: r.model_name.clone(),
            attempts: r.attempts,
            post_id: post_id.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundPayload {
    pub concepts: Vec<Concept>,
    pub outline: Vec<OutlineEntry>,
    /// Set when the concept list or selection changed after the outline
    /// was produced.
    pub outline_stale: bool,
    /// Labels exactly as last proposed by the model.
    pub machine_concepts: Vec<String>,
    pub next_concept: u32,
    pub warnings: Vec<String>,
    pub calls: Vec<CallRecord>,
}

impl BackgroundPayload {
    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.iter().find(|c| c.concept_id == id)
    }

    pub fn selected(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.iter().filter(|c| c.selected)
    }

    pub fn is_complete(&self) -> bool {
        !self.outline.is_empty() && !self.outline_stale
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadDataPayload {
    pub filter: CorpusFilter,
    pub sample_size: usize,
    pub seed: u64,
    /// Post ids after filtering, corpus order.
    pub post_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    pub remainder_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptFailure {
    pub post_id: String,
    pub machine_code: String,
    pub message: String,
}

/// Accounting for one coding pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingStats {
    pub transcripts: usize,
    pub proposed: usize,
    pub stored: usize,
    /// Quotes that do not occur in their transcript.
    pub hallucinations: usize,
    /// Proposals dropped for structural reasons: empty quote, empty label,
    /// or (in global coding) a label outside the codebook.
    pub schema_violations: usize,
    pub duplicates: usize,
    pub failures: Vec<TranscriptFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodingStep {
    Initial,
    Codebook,
    Global,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingPayload {
    pub codebook: Vec<Code>,
    pub applications: Vec<CodeApplication>,
    pub steps_done: BTreeSet<CodingStep>,
    /// Candidate definitions gathered during initial coding, by code id.
    pub candidates: BTreeMap<String, Vec<String>>,
    pub initial_stats: CodingStats,
    pub global_stats: CodingStats,
    /// Code labels the model attached to each post, kept for scoring
    /// machine output against later human refinement.
    pub machine_labels: BTreeMap<String, BTreeSet<String>>,
    pub next_code: u32,
    pub next_application: u32,
    pub warnings: Vec<String>,
    pub calls: Vec<CallRecord>,
}

impl CodingPayload {
    pub fn code(&self, id: &str) -> Option<&Code> {
        self.codebook.iter().find(|c| c.code_id == id)
    }

    pub fn code_by_label(&self, label: &str) -> Option<&Code> {
        let key = label_key(label);
        self.codebook.iter().find(|c| label_key(&c.label) == key)
    }

    pub fn code_ids(&self) -> BTreeSet<String> {
        self.codebook.iter().map(|c| c.code_id.clone()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.steps_done.contains(&CodingStep::Global)
    }

    pub fn hallucinations(&self) -> usize {
        self.initial_stats.hallucinations + self.global_stats.hallucinations
    }

    pub(crate) fn new_code(&mut self, label: &str, definition: &str) -> String {
        self.next_code += 1;
        let code_id = format!("code-{:04}", self.next_code);
        self.codebook.push(Code {
            code_id: code_id.clone(),
            label: label.trim().to_string(),
            definition: definition.trim().to_string(),
        });
        code_id
    }

    pub(crate) fn new_application_id(&mut self) -> String {
        self.next_application += 1;
        format!("app-{:05}", self.next_application)
    }

    /// Per-code application counts, zero for unused codes.
    pub fn application_counts(&self) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = self.codebook.iter().map(|c| (c.code_id.clone(), 0)).collect();
        for a in &self.applications {
            *out.entry(a.code_id.clone()).or_default() += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub produced_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
    pub buckets: BucketSet,
}

/// Shared shape of the reviewing and theming phases.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketPayload {
    pub buckets: BucketSet,
    /// The original machine grouping followed by one entry per redo.
    pub history: Vec<Revision>,
    pub warnings: Vec<String>,
    pub calls: Vec<CallRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Organization {
    #[default]
    #[serde(alias = "theme-code", alias = "theme_code")]
    ThemeAndCode,
    #[serde(alias = "post-by-post")]
    PostByPost,
}

impl std::str::FromStr for Organization {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theme_and_code" | "theme-code" | "theme_code" => Ok(Organization::ThemeAndCode),
            "post_by_post" | "post-by-post" => Ok(Organization::PostByPost),
            other => Err(crate::error::Error::InvalidArgument(format!("unknown organization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportPayload {
    pub organization: Organization,
    pub row_count: usize,
    /// sha256 of the exported CSV bytes.
    pub csv_sha256: String,
}

/// Case-insensitive comparison key for labels and names.
pub fn label_key(label: &str) -> String {
    label.trim().to_lowercase()
}
