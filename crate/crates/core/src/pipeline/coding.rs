//! Phase 3: initial coding on the sample, the codebook, global coding on
//! the remainder, and human edits of codes and applications.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::model::*;
use super::phase::Phase;
use super::quote::{normalize_for_match, QuoteIndex};
use super::workspace::{ApplicationEdit, CodebookEdit, Outcome, Progress, Workspace};
use crate::error::{Error, Result};
use crate::ingest::Transcript;
use crate::llm::{ids, vars::nested_lines, Gateway, ModelResponse, StructuredRequest};

#[derive(Debug)]
struct Proposal<'a> {
    code: &'a str,
    definition: &'a str,
    quote: &'a str,
    explanation: &'a str,
}

fn proposals(parsed: &Value) -> Vec<Proposal<'_>> {
    fn text<'v>(v: &'v Value, k: &str) -> &'v str {
        v.get(k).and_then(Value::as_str).unwrap_or("")
    }
    parsed["codes"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|c| Proposal {
            code: text(c, "code").trim(),
            definition: text(c, "definition").trim(),
            quote: text(c, "quote").trim(),
            explanation: text(c, "explanation").trim(),
        })
        .collect()
}

/// Identity of an application for duplicate detection.
fn app_key(post_id: &str, code_id: &str, quote: &str) -> (String, String, String) {
    (post_id.to_string(), code_id.to_string(), normalize_for_match(quote))
}

impl Workspace {
    fn coding_transcripts(&self, ids: &[String]) -> Result<Vec<&Transcript>> {
        ids.iter()
            .map(|id| {
                self.corpus
                    .get(id)
                    .ok_or_else(|| Error::Corrupt(format!("split references missing post {id}")))
            })
            .collect()
    }

    fn require_fresh_coding(&self, step: &str) -> Result<()> {
        self.data.require_ready(Phase::Coding)?;
        if self.data.states.get(Phase::Coding).stale {
            return Err(Error::PreconditionFailed(format!(
                "phase 3 is stale; rerun initial coding before {step}"
            )));
        }
        Ok(())
    }

    /// Calls the model once per transcript with bounded parallelism.
    fn code_each(
        &self,
        transcripts: &[&Transcript],
        build: impl Fn(&Transcript) -> Result<StructuredRequest>,
        gw: &Gateway,
        progress: Progress<'_>,
    ) -> Result<Vec<Result<ModelResponse>>> {
        let requests = transcripts.iter().map(|t| build(t)).collect::<Result<Vec<_>>>()?;
        Ok(gw.map_bounded(&requests, progress, |r| gw.complete_structured(r)))
    }

    pub(crate) fn initial_coding(&mut self, at: i64, gw: &Gateway, progress: Progress<'_>, out: &mut Outcome) -> Result<()> {
        self.data.require_ready(Phase::Coding)?;
        let transcripts = self.coding_transcripts(&self.data.load.sample_ids)?;
        if transcripts.is_empty() {
            return Err(Error::PreconditionFailed("the initial-coding sample is empty".into()));
        }
        let rq = self.research_questions_var();
        let outline = self.outline_var();
        let results = self.code_each(
            &transcripts,
            |t| {
                let query = format!("{}\n{}", t.title, t.body);
                Ok(StructuredRequest::new(ids::INITIAL_CODING)
                    .var("research_questions", rq.clone())
                    .var("concept_outline", outline.clone())
                    .var("post_id", t.post_id.clone())
                    .var("transcript", t.full_text())
                    .snippets(self.snippets_for(&query, gw)?))
            },
            gw,
            progress,
        )?;

        let mut p = CodingPayload::default();
        let mut stats = CodingStats {
            transcripts: transcripts.len(),
            ..Default::default()
        };
        let mut seen = BTreeSet::new();
        let mut last_err = None;
        for (t, res) in transcripts.iter().zip(results) {
            let resp = match res {
                Ok(r) => r,
                Err(e) => {
                    stats.failures.push(TranscriptFailure {
                        post_id: t.post_id.clone(),
                        machine_code: e.machine_code().into(),
                        message: e.to_string(),
                    });
                    last_err = Some(e);
                    continue;
                }
            };
            p.calls.push(CallRecord::of(ids::INITIAL_CODING, &resp, Some(&t.post_id)));
            let index = QuoteIndex::new(t);
            for prop in proposals(&resp.parsed) {
                stats.proposed += 1;
                if prop.code.is_empty() || prop.quote.is_empty() {
                    stats.schema_violations += 1;
                    continue;
                }
                if !index.contains(prop.quote)? {
                    stats.hallucinations += 1;
                    continue;
                }
                p.machine_labels
                    .entry(t.post_id.clone())
                    .or_default()
                    .insert(prop.code.to_string());
                let code_id = match p.code_by_label(prop.code) {
                    Some(c) => c.code_id.clone(),
                    None => p.new_code(prop.code, prop.definition),
                };
                let cands = p.candidates.entry(code_id.clone()).or_default();
                if !prop.definition.is_empty() && !cands.iter().any(|d| d == prop.definition) {
                    cands.push(prop.definition.to_string());
                }
                if !seen.insert(app_key(&t.post_id, &code_id, prop.quote)) {
                    stats.duplicates += 1;
                    continue;
                }
                let application_id = p.new_application_id();
                p.applications.push(CodeApplication {
                    application_id,
                    post_id: t.post_id.clone(),
                    code_id,
                    quote: prop.quote.to_string(),
                    explanation: prop.explanation.to_string(),
                    verified: true,
                    origin: Origin::Initial,
                });
                stats.stored += 1;
            }
        }
        if stats.failures.len() == transcripts.len() {
            return Err(last_err.expect("at least one failure"));
        }
        for c in &mut p.codebook {
            if c.definition.is_empty() {
                if let Some(d) = p.candidates.get(&c.code_id).and_then(|v| v.first()) {
                    c.definition = d.clone();
                }
            }
        }
        out.details = serde_json::to_value(&stats)?;
        p.initial_stats = stats;
        p.steps_done.insert(CodingStep::Initial);
        self.data.coding = p;
        self.machine_result(Phase::Coding, at, out);
        Ok(())
    }

    pub(crate) fn derive_codebook(&mut self, at: i64, gw: &Gateway, out: &mut Outcome) -> Result<()> {
        self.require_fresh_coding("deriving the codebook")?;
        let p = &self.data.coding;
        if !p.steps_done.contains(&CodingStep::Initial) {
            return Err(Error::PhaseOrder("run initial coding before deriving the codebook".into()));
        }
        if p.applications.is_empty() || p.codebook.is_empty() {
            return Err(Error::PreconditionFailed("initial coding produced no verified applications".into()));
        }
        let codes_var = nested_lines(p.codebook.iter().map(|c| {
            let cands = p.candidates.get(&c.code_id).filter(|v| !v.is_empty());
            let details: Vec<&str> = match cands {
                Some(v) => v.iter().map(String::as_str).collect(),
                None => vec![c.definition.as_str()],
            };
            (c.label.as_str(), details)
        }));
        let req = StructuredRequest::new(ids::CODEBOOK_DEFINITIONS)
            .var("research_questions", self.research_questions_var())
            .var("codes", codes_var);
        let resp = gw.complete_structured(&req)?;

        let p = &mut self.data.coding;
        let mut warnings = Vec::new();
        let mut defined = BTreeSet::new();
        for entry in resp.parsed["codes"].as_array().into_iter().flatten() {
            let label = entry["code"].as_str().unwrap_or("").trim();
            let definition = entry["definition"].as_str().unwrap_or("").trim();
            let key = label_key(label);
            match p.codebook.iter_mut().find(|c| label_key(&c.label) == key) {
                Some(c) if !definition.is_empty() && defined.insert(c.code_id.clone()) => {
                    c.definition = definition.to_string();
                }
                Some(_) => warnings.push(format!("ignored repeated or empty definition for {label:?}")),
                None => warnings.push(format!("definition for unknown code {label:?} ignored")),
            }
        }
        for c in &p.codebook {
            if !defined.contains(&c.code_id) {
                warnings.push(format!("no merged definition for {:?}; kept the first proposal", c.label));
            }
        }
        p.candidates.clear();
        p.applications.retain(|a| a.origin != Origin::Global);
        p.global_stats = CodingStats::default();
        p.steps_done.remove(&CodingStep::Global);
        p.steps_done.insert(CodingStep::Codebook);
        p.calls.retain(|c| c.template_id == ids::INITIAL_CODING);
        p.calls.push(CallRecord::of(ids::CODEBOOK_DEFINITIONS, &resp, None));
        p.warnings = warnings.clone();
        out.warnings.extend(warnings);
        self.machine_result(Phase::Coding, at, out);
        Ok(())
    }

    pub(crate) fn global_coding(&mut self, at: i64, gw: &Gateway, progress: Progress<'_>, out: &mut Outcome) -> Result<()> {
        self.require_fresh_coding("global coding")?;
        if !self.data.coding.steps_done.contains(&CodingStep::Codebook) {
            return Err(Error::PhaseOrder("derive the codebook before global coding".into()));
        }
        if self.data.coding.codebook.is_empty() {
            return Err(Error::PreconditionFailed("the codebook is empty".into()));
        }
        let transcripts = self.coding_transcripts(&self.data.load.remainder_ids)?;
        let codebook_var = nested_lines(
            self.data
                .coding
                .codebook
                .iter()
                .map(|c| (c.label.as_str(), std::iter::once(c.definition.as_str()))),
        );
        let results = self.code_each(
            &transcripts,
            |t| {
                Ok(StructuredRequest::new(ids::GLOBAL_CODING)
                    .var("codebook", codebook_var.clone())
                    .var("post_id", t.post_id.clone())
                    .var("transcript", t.full_text()))
            },
            gw,
            progress,
        )?;

        let mut p = self.data.coding.clone();
        p.applications.retain(|a| a.origin != Origin::Global);
        p.calls.retain(|c| c.template_id != ids::GLOBAL_CODING);
        for t in &transcripts {
            p.machine_labels.remove(&t.post_id);
        }
        let mut seen: BTreeSet<_> = p
            .applications
            .iter()
            .map(|a| app_key(&a.post_id, &a.code_id, &a.quote))
            .collect();
        let mut stats = CodingStats {
            transcripts: transcripts.len(),
            ..Default::default()
        };
        let mut last_err = None;
        for (t, res) in transcripts.iter().zip(results) {
            let resp = match res {
                Ok(r) => r,
                Err(e) => {
                    stats.failures.push(TranscriptFailure {
                        post_id: t.post_id.clone(),
                        machine_code: e.machine_code().into(),
                        message: e.to_string(),
                    });
                    last_err = Some(e);
                    continue;
                }
            };
            p.calls.push(CallRecord::of(ids::GLOBAL_CODING, &resp, Some(&t.post_id)));
            let index = QuoteIndex::new(t);
            for prop in proposals(&resp.parsed) {
                stats.proposed += 1;
                let Some(code_id) = p.code_by_label(prop.code).map(|c| c.code_id.clone()) else {
                    stats.schema_violations += 1;
                    continue;
                };
                if prop.quote.is_empty() {
                    stats.schema_violations += 1;
                    continue;
                }
                if !index.contains(prop.quote)? {
                    stats.hallucinations += 1;
                    continue;
                }
                p.machine_labels
                    .entry(t.post_id.clone())
                    .or_default()
                    .insert(prop.code.to_string());
                if !seen.insert(app_key(&t.post_id, &code_id, prop.quote)) {
                    stats.duplicates += 1;
                    continue;
                }
                let application_id = p.new_application_id();
                p.applications.push(CodeApplication {
                    application_id,
                    post_id: t.post_id.clone(),
                    code_id,
                    quote: prop.quote.to_string(),
                    explanation: prop.explanation.to_string(),
                    verified: true,
                    origin: Origin::Global,
                });
                stats.stored += 1;
            }
        }
        if !transcripts.is_empty() && stats.failures.len() == transcripts.len() {
            return Err(last_err.expect("at least one failure"));
        }
        if transcripts.is_empty() {
            out.warnings.push("the remainder is empty; global coding had nothing to code".into());
        }
        out.details = serde_json::to_value(&stats)?;
        p.global_stats = stats;
        p.steps_done.insert(CodingStep::Global);
        self.data.coding = p;
        self.machine_result(Phase::Coding, at, out);
        Ok(())
    }

    /// Keeps bucket phases partitioning the codebook after a code change.
    fn cascade_code_added(&mut self, code_id: &str, label: &str) {
        for (phase, payload) in [(Phase::Review, &mut self.data.review), (Phase::Themes, &mut self.data.themes)] {
            if !self.data.states.get(phase).is_empty() {
                payload.buckets.add_singleton(code_id, label);
            }
        }
    }

    fn cascade_code_removed(&mut self, code_id: &str) {
        self.data.review.buckets.remove_item(code_id);
        self.data.themes.buckets.remove_item(code_id);
    }

    fn require_codebook(&self) -> Result<()> {
        if self.data.states.get(Phase::Coding).is_empty() {
            return Err(Error::PhaseOrder("run initial coding first".into()));
        }
        Ok(())
    }

    pub(crate) fn edit_codebook(&mut self, edit: &CodebookEdit, at: i64, out: &mut Outcome) -> Result<()> {
        self.require_codebook()?;
        let check_label = |p: &CodingPayload, label: &str, except: Option<&str>| -> Result<String> {
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::InvalidArgument("code label must not be empty".into()));
            }
            if p.code_by_label(label).is_some_and(|c| Some(c.code_id.as_str()) != except) {
                return Err(Error::NameConflict(label.to_string()));
            }
            Ok(label.to_string())
        };
        let position = |p: &CodingPayload, id: &str| {
            p.codebook
                .iter()
                .position(|c| c.code_id == id)
                .ok_or_else(|| Error::NotFound(format!("code {id}")))
        };
        match edit {
            CodebookEdit::Rename { code_id, label } => {
                let p = &mut self.data.coding;
                let i = position(p, code_id)?;
                p.codebook[i].label = check_label(p, label, Some(code_id))?;
            }
            CodebookEdit::Redefine { code_id, definition } => {
                let p = &mut self.data.coding;
                let i = position(p, code_id)?;
                p.codebook[i].definition = definition.trim().to_string();
            }
            CodebookEdit::Add { label, definition } => {
                let label = check_label(&self.data.coding, label, None)?;
                let code_id = self.data.coding.new_code(&label, definition);
                out.details = serde_json::json!({ "code_id": code_id });
                self.cascade_code_added(&code_id, &label);
            }
            CodebookEdit::Delete { code_id } => {
                let p = &mut self.data.coding;
                let i = position(p, code_id)?;
                p.codebook.remove(i);
                p.candidates.remove(code_id);
                let removed: Vec<String> = p
                    .applications
                    .iter()
                    .filter(|a| a.code_id == *code_id)
                    .map(|a| a.application_id.clone())
                    .collect();
                p.applications.retain(|a| a.code_id != *code_id);
                out.details = serde_json::json!({ "removed_applications": removed });
                self.cascade_code_removed(code_id);
            }
            CodebookEdit::Merge { code_ids, into } => {
                let p = &mut self.data.coding;
                position(p, into)?;
                let sources: BTreeSet<&String> = code_ids.iter().collect();
                if sources.is_empty() || sources.contains(into) {
                    return Err(Error::InvalidAction("merge needs source codes distinct from the target".into()));
                }
                for id in &sources {
                    position(p, id)?;
                }
                p.codebook.retain(|c| !sources.contains(&c.code_id));
                for id in &sources {
                    p.candidates.remove(*id);
                }
                let mut seen = BTreeSet::new();
                let mut dropped = Vec::new();
                let apps = std::mem::take(&mut p.applications);
                for mut a in apps {
                    if sources.contains(&a.code_id) {
                        a.code_id = into.clone();
                    }
                    if seen.insert(app_key(&a.post_id, &a.code_id, &a.quote)) {
                        p.applications.push(a);
                    } else {
                        dropped.push(a.application_id);
                    }
                }
                out.details = serde_json::json!({ "removed_applications": dropped });
                for id in sources {
                    self.cascade_code_removed(id);
                }
            }
        }
        self.human_edit(Phase::Coding, at, out);
        Ok(())
    }

    pub(crate) fn edit_application(&mut self, edit: &ApplicationEdit, at: i64, out: &mut Outcome) -> Result<()> {
        self.require_codebook()?;
        let verify = |ws: &Workspace, post_id: &str, quote: &str| -> Result<String> {
            let t = ws
                .corpus
                .get(post_id)
                .ok_or_else(|| Error::NotFound(format!("post {post_id}")))?;
            if !QuoteIndex::new(t).contains(quote)? {
                return Err(Error::QuoteNotFound {
                    post_id: post_id.to_string(),
                });
            }
            Ok(quote.trim().to_string())
        };
        let duplicate = |p: &CodingPayload, skip: Option<&str>, post: &str, code: &str, quote: &str| {
            let key = app_key(post, code, quote);
            p.applications
                .iter()
                .any(|a| Some(a.application_id.as_str()) != skip && app_key(&a.post_id, &a.code_id, &a.quote) == key)
        };
        match edit {
            ApplicationEdit::Add {
                post_id,
                code_id,
                label,
                definition,
                quote,
                explanation,
            } => {
                let quote = verify(self, post_id, quote)?;
                let code_id = match (code_id, label) {
                    (Some(id), _) => {
                        self.data
                            .coding
                            .code(id)
                            .ok_or_else(|| Error::NotFound(format!("code {id}")))?;
                        id.clone()
                    }
                    (None, Some(label)) if !label.trim().is_empty() => match self.data.coding.code_by_label(label) {
                        Some(c) => c.code_id.clone(),
                        None => {
                            let label = label.trim().to_string();
                            let id = self
                                .data
                                .coding
                                .new_code(&label, definition.as_deref().unwrap_or(""));
                            self.cascade_code_added(&id, &label);
                            id
                        }
                    },
                    _ => return Err(Error::InvalidArgument("give a code_id or a label".into())),
                };
                let p = &mut self.data.coding;
                if duplicate(p, None, post_id, &code_id, &quote) {
                    return Err(Error::InvalidAction("that application already exists".into()));
                }
                let application_id = p.new_application_id();
                out.details = serde_json::json!({ "application_id": application_id, "code_id": code_id });
                p.applications.push(CodeApplication {
                    application_id,
                    post_id: post_id.clone(),
                    code_id,
                    quote,
                    explanation: explanation.trim().to_string(),
                    verified: true,
                    origin: Origin::Human,
                });
            }
            ApplicationEdit::Edit {
                application_id,
                code_id,
                quote,
                explanation,
            } => {
                let i = self
                    .data
                    .coding
                    .applications
                    .iter()
                    .position(|a| a.application_id == *application_id)
                    .ok_or_else(|| Error::NotFound(format!("application {application_id}")))?;
                let mut a = self.data.coding.applications[i].clone();
                if let Some(id) = code_id {
                    self.data
                        .coding
                        .code(id)
                        .ok_or_else(|| Error::NotFound(format!("code {id}")))?;
                    a.code_id = id.clone();
                }
                if let Some(q) = quote {
                    a.quote = verify(self, &a.post_id, q)?;
                }
                if let Some(e) = explanation {
                    a.explanation = e.trim().to_string();
                }
                if duplicate(&self.data.coding, Some(application_id), &a.post_id, &a.code_id, &a.quote) {
                    return Err(Error::InvalidAction("the edit would duplicate another application".into()));
                }
                a.origin = Origin::Human;
                self.data.coding.applications[i] = a;
            }
            ApplicationEdit::Delete { application_id } => {
                let p = &mut self.data.coding;
                let before = p.applications.len();
                p.applications.retain(|a| a.application_id != *application_id);
                if p.applications.len() == before {
                    return Err(Error::NotFound(format!("application {application_id}")));
                }
            }
        }
        self.human_edit(Phase::Coding, at, out);
        Ok(())
    }

    /// Applications grouped by post, for display and scoring.
    pub fn applications_by_post(&self) -> BTreeMap<&str, Vec<&CodeApplication>> {
        let mut out: BTreeMap<&str, Vec<&CodeApplication>> = BTreeMap::new();
        for a in &self.data.coding.applications {
            out.entry(a.post_id.as_str()).or_default().push(a);
        }
        out
    }
}
