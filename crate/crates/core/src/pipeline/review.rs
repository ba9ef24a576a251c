//! Phases 4 and 5: clustering codes into reviewed codes, grouping those
//! into themes, bucket edits, and redo with feedback. Phase 6 bookkeeping
//! lives here too.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::buckets::{BucketEdit, BucketSet};
use super::model::*;
use super::phase::Phase;
use super::workspace::{Outcome, Workspace};
use crate::error::{Error, Result};
use crate::llm::{ids, vars::nested_lines, with_feedback_value, Gateway, StructuredRequest};

fn groups_from(parsed: &Value, list: &str, name_key: &str, members_key: &str) -> Vec<(String, Vec<String>)> {
    parsed[list]
        .as_array()
        .into_iter()
        .flatten()
        .map(|g| {
            let name = g[name_key].as_str().unwrap_or("").trim().to_string();
            let members = g[members_key]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(Value::as_str)
                .map(|s| s.trim().to_string())
                .collect();
            (name, members)
        })
        .collect()
}

impl Workspace {
    fn cluster_request(&self) -> StructuredRequest {
        let codes = nested_lines(
            self.data
                .coding
                .codebook
                .iter()
                .map(|c| (c.label.as_str(), std::iter::once(c.definition.as_str()).filter(|d| !d.is_empty()))),
        );
        StructuredRequest::new(ids::CLUSTER_CODES).var("codes", codes)
    }

    fn code_label(&self, id: &str) -> String {
        self.data.coding.code(id).map(|c| c.label.clone()).unwrap_or_else(|| id.to_string())
    }

    /// Current clusters in the model's answer shape, used as the prior
    /// output when redoing with feedback.
    fn clusters_as_answer(&self) -> Value {
        let clusters: Vec<Value> = self
            .data
            .review
            .buckets
            .buckets
            .iter()
            .map(|b| json!({ "reviewed_code": b.name, "codes": b.members.iter().map(|m| self.code_label(m)).collect::<Vec<_>>() }))
            .collect();
        json!({ "clusters": clusters })
    }

    fn reviewed_label_of(&self, code_id: &str) -> Option<&str> {
        self.data.review.buckets.bucket_of(code_id).map(|b| b.name.as_str())
    }

    fn themes_as_answer(&self) -> Value {
        let themes: Vec<Value> = self
            .data
            .themes
            .buckets
            .buckets
            .iter()
            .map(|b| {
                let mut reviewed: Vec<&str> = Vec::new();
                for m in &b.members {
                    if let Some(r) = self.reviewed_label_of(m) {
                        if !reviewed.contains(&r) {
                            reviewed.push(r);
                        }
                    }
                }
                json!({ "theme": b.name, "reviewed_codes": reviewed })
            })
            .collect();
        json!({ "themes": themes })
    }

    fn feedback_request(&self, base: StructuredRequest, phase: Phase, feedback: Option<&String>) -> Result<StructuredRequest> {
        let Some(fb) = feedback else { return Ok(base) };
        if self.data.states.get(phase).is_empty() {
            return Err(Error::PreconditionFailed(format!("phase {phase} has nothing to redo yet")));
        }
        let prior = match phase {
            Phase::Review => self.clusters_as_answer(),
            _ => self.themes_as_answer(),
        };
        with_feedback_value(&base, fb, &prior)
    }

    fn commit_buckets(
        &mut self,
        phase: Phase,
        buckets: BucketSet,
        feedback: Option<&String>,
        warnings: Vec<String>,
        call: CallRecord,
        at: i64,
        out: &mut Outcome,
    ) {
        let payload = match phase {
            Phase::Review => &mut self.data.review,
            _ => &mut self.data.themes,
        };
        let revision = Revision {
            produced_at: at,
            feedback: feedback.cloned(),
            buckets: buckets.clone(),
        };
        if feedback.is_some() {
            payload.history.push(revision);
            payload.calls.push(call);
        } else {
            payload.history = vec![revision];
            payload.calls = vec![call];
        }
        payload.buckets = buckets;
        payload.warnings = warnings.clone();
        out.warnings.extend(warnings);
        self.machine_result(phase, at, out);
    }

    pub(crate) fn cluster_codes(&mut self, feedback: Option<&String>, at: i64, gw: &Gateway, out: &mut Outcome) -> Result<()> {
        self.data.require_ready(Phase::Review)?;
        let req = self.feedback_request(self.cluster_request(), Phase::Review, feedback)?;
        let resp = gw.complete_structured(&req)?;
        let coding = &self.data.coding;
        let groups = groups_from(&resp.parsed, "clusters", "reviewed_code", "codes")
            .into_iter()
            .map(|(name, labels)| {
                let ids = labels
                    .into_iter()
                    .map(|l| coding.code_by_label(&l).map(|c| c.code_id.clone()).unwrap_or(l))
                    .collect();
                (name, ids)
            })
            .collect();
        let universe: Vec<String> = coding.codebook.iter().map(|c| c.code_id.clone()).collect();
        let (buckets, warnings) = BucketSet::from_groups("rc", groups, &universe, |id| self.code_label(id));
        let call = CallRecord::of(ids::CLUSTER_CODES, &resp, None);
        self.commit_buckets(Phase::Review, buckets, feedback, warnings, call, at, out);
        Ok(())
    }

    pub(crate) fn generate_themes(&mut self, feedback: Option<&String>, at: i64, gw: &Gateway, out: &mut Outcome) -> Result<()> {
        self.data.require_ready(Phase::Themes)?;
        let clusters = &self.data.review.buckets;
        let labelled: Vec<(String, Vec<String>)> = clusters
            .buckets
            .iter()
            .map(|b| (b.name.clone(), b.members.iter().map(|m| self.code_label(m)).collect()))
            .collect();
        let reviewed = nested_lines(labelled.iter().map(|(n, ms)| (n.as_str(), ms.iter().map(String::as_str))));
        let base = StructuredRequest::new(ids::GENERATE_THEMES).var("reviewed_codes", reviewed);
        let req = self.feedback_request(base, Phase::Themes, feedback)?;
        let resp = gw.complete_structured(&req)?;

        let by_name = |name: &str| {
            let key = label_key(name);
            clusters
                .buckets
                .iter()
                .find(|b| label_key(&b.name) == key)
                .map(|b| b.bucket_id.clone())
        };
        let groups = groups_from(&resp.parsed, "themes", "theme", "reviewed_codes")
            .into_iter()
            .map(|(name, labels)| (name, labels.into_iter().map(|l| by_name(&l).unwrap_or(l)).collect()))
            .collect();
        let universe: Vec<String> = clusters.buckets.iter().map(|b| b.bucket_id.clone()).collect();
        let cluster_name = |id: &str| clusters.bucket(id).map(|b| b.name.clone()).unwrap_or_default();
        let (mut themes, warnings) = BucketSet::from_groups("th", groups, &universe, cluster_name);
        for theme in &mut themes.buckets {
            theme.members = theme
                .members
                .iter()
                .flat_map(|cid| clusters.bucket(cid).map(|b| b.members.clone()).unwrap_or_default())
                .collect();
        }
        let call = CallRecord::of(ids::GENERATE_THEMES, &resp, None);
        self.commit_buckets(Phase::Themes, themes, feedback, warnings, call, at, out);
        Ok(())
    }

    pub(crate) fn edit_buckets(&mut self, phase: Phase, edit: &BucketEdit, at: i64, out: &mut Outcome) -> Result<()> {
        if self.data.states.get(phase).is_empty() {
            return Err(Error::PhaseOrder(format!("phase {phase} has no buckets to edit yet")));
        }
        let payload = match phase {
            Phase::Review => &mut self.data.review,
            _ => &mut self.data.themes,
        };
        payload.buckets.apply(edit)?;
        self.human_edit(phase, at, out);
        Ok(())
    }

    pub(crate) fn build_report_phase(&mut self, organization: Organization, at: i64, out: &mut Outcome) -> Result<()> {
        self.data.require_ready(Phase::Report)?;
        let rows = crate::report::build_report(self, organization)?;
        let csv = crate::report::to_csv_bytes(&rows)?;
        self.data.report = ReportPayload {
            organization,
            row_count: rows.len(),
            csv_sha256: hex(&Sha256::digest(&csv)),
        };
        out.details = json!({ "rows": rows.len() });
        self.machine_result(Phase::Report, at, out);
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
