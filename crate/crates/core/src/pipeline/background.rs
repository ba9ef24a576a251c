//! Phase 1: related concepts, selection and the concept outline.

use std::collections::BTreeSet;

use super::model::{label_key, BackgroundPayload, CallRecord, Concept, OutlineEntry};
use super::phase::Phase;
use super::workspace::{ConceptEdit, Outcome, Workspace};
use crate::error::{Error, Result};
use crate::llm::{ids, vars::nested_lines, Gateway, StructuredRequest};

pub const MIN_CONCEPTS: usize = 8;
pub const MAX_CONCEPTS: usize = 20;

fn strings(v: &serde_json::Value) -> impl Iterator<Item = &str> {
    v.as_array().into_iter().flatten().filter_map(|x| x.as_str())
}

impl BackgroundPayload {
    fn fresh_concept_id(&mut self) -> String {
        self.next_concept += 1;
        format!("concept-{:03}", self.next_concept)
    }

    fn label_taken(&self, label: &str, except: Option<&str>) -> bool {
        let key = label_key(label);
        self.concepts
            .iter()
            .any(|c| Some(c.concept_id.as_str()) != except && label_key(&c.label) == key)
    }

    fn invalidate_outline(&mut self) {
        if !self.outline.is_empty() {
            self.outline_stale = true;
        }
    }
}

impl Workspace {
    pub(crate) fn generate_concepts(&mut self, at: i64, gw: &Gateway, out: &mut Outcome) -> Result<()> {
        if self.context.documents().is_empty() {
            return Err(Error::PreconditionFailed(
                "add at least one context document or research question first".into(),
            ));
        }
        let rq = self.research_questions_var();
        let query = self.context.research_questions().join("\n");
        let query = if query.is_empty() {
            self.context.documents()[0].text.chars().take(500).collect()
        } else {
            query
        };
        let req = StructuredRequest::new(ids::RELATED_CONCEPTS)
            .var("research_questions", rq)
            .snippets(self.snippets_for(&query, gw)?);
        let resp = gw.complete_structured(&req)?;

        let mut payload = BackgroundPayload::default();
        let mut seen = BTreeSet::new();
        for label in strings(&resp.parsed["concepts"]) {
            let label = label.trim();
            if label.is_empty() {
                continue;
            }
            if !seen.insert(label_key(label)) {
                payload.warnings.push(format!("duplicate concept {label:?} dropped"));
                continue;
            }
            if payload.concepts.len() == MAX_CONCEPTS {
                payload.warnings.push(format!("more than {MAX_CONCEPTS} concepts proposed; kept the first {MAX_CONCEPTS}"));
                break;
            }
            let concept_id = payload.fresh_concept_id();
            payload.concepts.push(Concept {
                concept_id,
                label: label.to_string(),
                selected: false,
            });
        }
        if payload.concepts.len() < MIN_CONCEPTS {
            payload.warnings.push(format!(
                "only {} concepts proposed (expected at least {MIN_CONCEPTS})",
                payload.concepts.len()
            ));
        }
        payload.machine_concepts = payload.concepts.iter().map(|c| c.label.clone()).collect();
        payload.calls.push(CallRecord::of(ids::RELATED_CONCEPTS, &resp, None));
        out.warnings.extend(payload.warnings.iter().cloned());
        self.data.background = payload;
        self.machine_result(Phase::Background, at, out);
        Ok(())
    }

    pub(crate) fn select_concepts(&mut self, ids: &BTreeSet<String>, at: i64, out: &mut Outcome) -> Result<()> {
        let bg = &mut self.data.background;
        if let Some(missing) = ids.iter().find(|id| bg.concept(id).is_none()) {
            return Err(Error::NotFound(format!("concept {missing}")));
        }
        let mut changed = false;
        for c in &mut bg.concepts {
            let want = ids.contains(&c.concept_id);
            changed |= c.selected != want;
            c.selected = want;
        }
        if changed {
            bg.invalidate_outline();
        }
        self.human_edit(Phase::Background, at, out);
        Ok(())
    }

    pub(crate) fn edit_concepts(&mut self, edit: &ConceptEdit, at: i64, out: &mut Outcome) -> Result<()> {
        let bg = &mut self.data.background;
        match edit {
            ConceptEdit::Rename { concept_id, label } => {
                let label = label.trim();
                if label.is_empty() {
                    return Err(Error::InvalidArgument("concept label must not be empty".into()));
                }
                if bg.label_taken(label, Some(concept_id)) {
                    return Err(Error::NameConflict(label.to_string()));
                }
                let c = bg
                    .concepts
                    .iter_mut()
                    .find(|c| c.concept_id == *concept_id)
                    .ok_or_else(|| Error::NotFound(format!("concept {concept_id}")))?;
                c.label = label.to_string();
                if c.selected {
                    bg.invalidate_outline();
                }
            }
            ConceptEdit::Add { label } => {
                let label = label.trim();
                if label.is_empty() {
                    return Err(Error::InvalidArgument("concept label must not be empty".into()));
                }
                if bg.label_taken(label, None) {
                    return Err(Error::NameConflict(label.to_string()));
                }
                let concept_id = bg.fresh_concept_id();
                out.details = serde_json::json!({ "concept_id": concept_id });
                bg.concepts.push(Concept {
                    concept_id,
                    label: label.to_string(),
                    selected: false,
                });
            }
            ConceptEdit::Delete { concept_id } => {
                let i = bg
                    .concepts
                    .iter()
                    .position(|c| c.concept_id == *concept_id)
                    .ok_or_else(|| Error::NotFound(format!("concept {concept_id}")))?;
                let removed = bg.concepts.remove(i);
                if removed.selected {
                    bg.invalidate_outline();
                }
            }
        }
        self.human_edit(Phase::Background, at, out);
        Ok(())
    }

    pub(crate) fn generate_outline(&mut self, at: i64, gw: &Gateway, out: &mut Outcome) -> Result<()> {
        if self.data.states.get(Phase::Background).is_empty() {
            return Err(Error::PhaseOrder("generate related concepts before the outline".into()));
        }
        if self.data.states.get(Phase::Background).stale {
            return Err(Error::PreconditionFailed(
                "the context changed since concepts were generated; regenerate them first".into(),
            ));
        }
        let selected: Vec<Concept> = self.data.background.selected().cloned().collect();
        if selected.is_empty() {
            return Err(Error::PreconditionFailed("select at least one concept".into()));
        }
        let concepts_var = nested_lines(selected.iter().map(|c| (c.label.as_str(), std::iter::empty())));
        let query: Vec<&str> = selected.iter().map(|c| c.label.as_str()).collect();
        let req = StructuredRequest::new(ids::CONCEPT_OUTLINE)
            .var("research_questions", self.research_questions_var())
            .var("concepts", concepts_var)
            .snippets(self.snippets_for(&query.join(", "), gw)?);
        let resp = gw.complete_structured(&req)?;

        let mut warnings = Vec::new();
        let mut defs: Vec<Option<String>> = vec![None; selected.len()];
        for entry in resp.parsed["entries"].as_array().into_iter().flatten() {
            let label = entry["concept"].as_str().unwrap_or("").trim();
            let definition = entry["definition"].as_str().unwrap_or("").trim();
            let Some(i) = selected.iter().position(|c| label_key(&c.label) == label_key(label)) else {
                warnings.push(format!("outline entry for unselected concept {label:?} dropped"));
                continue;
            };
            if defs[i].is_some() {
                warnings.push(format!("second outline entry for {label:?} dropped"));
            } else if definition.is_empty() {
                warnings.push(format!("empty definition for {label:?} dropped"));
            } else {
                defs[i] = Some(definition.to_string());
            }
        }
        let outline = selected
            .iter()
            .zip(defs)
            .map(|(c, d)| {
                let definition = d.unwrap_or_else(|| {
                    warnings.push(format!("no definition proposed for {:?}; left empty for editing", c.label));
                    String::new()
                });
                OutlineEntry {
                    concept_id: c.concept_id.clone(),
                    definition,
                }
            })
            .collect();
        let bg = &mut self.data.background;
        bg.outline = outline;
        bg.outline_stale = false;
        bg.warnings = warnings.clone();
        bg.calls.retain(|c| c.template_id != ids::CONCEPT_OUTLINE);
        bg.calls.push(CallRecord::of(ids::CONCEPT_OUTLINE, &resp, None));
        out.warnings.extend(warnings);
        self.machine_result(Phase::Background, at, out);
        Ok(())
    }

    pub(crate) fn edit_outline(&mut self, concept_id: &str, definition: &str, at: i64, out: &mut Outcome) -> Result<()> {
        let definition = definition.trim();
        if definition.is_empty() {
            return Err(Error::InvalidArgument("definition must not be empty".into()));
        }
        let entry = self
            .data
            .background
            .outline
            .iter_mut()
            .find(|e| e.concept_id == concept_id)
            .ok_or_else(|| Error::NotFound(format!("outline entry for concept {concept_id}")))?;
        entry.definition = definition.to_string();
        self.human_edit(Phase::Background, at, out);
        Ok(())
    }

    /// `concept_outline` prompt variable: label with its definition.
    pub(crate) fn outline_var(&self) -> String {
        let bg = &self.data.background;
        nested_lines(bg.outline.iter().filter_map(|e| {
            let c = bg.concept(&e.concept_id)?;
            Some((c.label.as_str(), std::iter::once(e.definition.as_str()).filter(|d| !d.is_empty())))
        }))
    }
}
