//! Prompt templates: one text asset per pipeline operation under
//! `prompts/<template_id>.txt`, with `{{name}}` placeholders.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::schema::Schema;
use crate::error::{Error, Result};

pub mod ids {
    pub const RELATED_CONCEPTS: &str = "related_concepts";
    pub const CONCEPT_OUTLINE: &str = "concept_outline";
    pub const INITIAL_CODING: &str = "initial_coding";
    pub const CODEBOOK_DEFINITIONS: &str = "codebook_definitions";
    pub const GLOBAL_CODING: &str = "global_coding";
    pub const CLUSTER_CODES: &str = "cluster_codes";
    pub const GENERATE_THEMES: &str = "generate_themes";

    pub const ALL: [&str; 7] = [
        RELATED_CONCEPTS,
        CONCEPT_OUTLINE,
        INITIAL_CODING,
        CODEBOOK_DEFINITIONS,
        GLOBAL_CODING,
        CLUSTER_CODES,
        GENERATE_THEMES,
    ];
}

const CONTEXT: &str = "context";
const FEEDBACK: &str = "feedback";
const SCHEMA: &str = "schema";

const BUILTIN: [(&str, &str); 7] = [
    (ids::RELATED_CONCEPTS, include_str!("../../prompts/related_concepts.txt")),
    (ids::CONCEPT_OUTLINE, include_str!("../../prompts/concept_outline.txt")),
    (ids::INITIAL_CODING, include_str!("../../prompts/initial_coding.txt")),
    (ids::CODEBOOK_DEFINITIONS, include_str!("../../prompts/codebook_definitions.txt")),
    (ids::GLOBAL_CODING, include_str!("../../prompts/global_coding.txt")),
    (ids::CLUSTER_CODES, include_str!("../../prompts/cluster_codes.txt")),
    (ids::GENERATE_THEMES, include_str!("../../prompts/generate_themes.txt")),
];

/// Output schema demanded by each template.
pub fn output_schema(template_id: &str) -> Option<Schema> {
    use Schema as S;
    let s = match template_id {
        ids::RELATED_CONCEPTS => S::object([("concepts", S::array(S::String))]),
        ids::CONCEPT_OUTLINE => S::object([(
            "entries",
            S::array(S::object([("concept", S::String), ("definition", S::String)])),
        )]),
        ids::INITIAL_CODING => S::object([(
            "codes",
            S::array(S::object([
                ("code", S::String),
                ("definition", S::String),
                ("quote", S::String),
                ("explanation", S::String),
            ])),
        )]),
        ids::CODEBOOK_DEFINITIONS => S::object([(
            "codes",
            S::array(S::object([("code", S::String), ("definition", S::String)])),
        )]),
        ids::GLOBAL_CODING => S::object([(
            "codes",
            S::array(S::object([
                ("code", S::String),
                ("quote", S::String),
                ("explanation", S::String),
            ])),
        )]),
        ids::CLUSTER_CODES => S::object([(
            "clusters",
            S::array(S::object([
                ("reviewed_code", S::String),
                ("codes", S::array(S::String)),
            ])),
        )]),
        ids::GENERATE_THEMES => S::object([(
            "themes",
            S::array(S::object([
                ("theme", S::String),
                ("reviewed_codes", S::array(S::String)),
            ])),
        )]),
        _ => return None,
    };
    Some(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

fn parse_segments(text: &str) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        if open > 0 {
            out.push(Segment::Text(rest[..open].to_string()));
        }
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        let name = after[..close].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Template(format!("bad placeholder name {name:?}")));
        }
        out.push(Segment::Slot(name.to_string()));
        rest = &after[close + 2..];
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub template_id: String,
    /// Short content digest of the asset text.
    pub version: String,
    pub system_text: String,
    pub user_template: String,
    pub output_schema: Schema,
    user_segments: Vec<Segment>,
}

impl PromptTemplate {
    /// Parses an asset with `[system]` and `[user]` sections.
    pub fn parse(template_id: &str, text: &str) -> Result<Self> {
        let schema = output_schema(template_id)
            .ok_or_else(|| Error::Template(format!("no schema for template {template_id}")))?;
        let sys_at = text
            .find("[system]")
            .ok_or_else(|| Error::Template(format!("{template_id}: missing [system] section")))?;
        let user_at = text
            .find("[user]")
            .ok_or_else(|| Error::Template(format!("{template_id}: missing [user] section")))?;
        if user_at < sys_at {
            return Err(Error::Template(format!("{template_id}: [system] must precede [user]")));
        }
        let system_text = text[sys_at + "[system]".len()..user_at].trim().to_string();
        let user_template = text[user_at + "[user]".len()..].trim().to_string();
        let user_segments = parse_segments(&user_template)?;
        if parse_segments(&system_text)?
            .iter()
            .any(|s| matches!(s, Segment::Slot(_)))
        {
            return Err(Error::Template(format!("{template_id}: placeholders are only allowed in [user]")));
        }
        let digest = Sha256::digest(text.as_bytes());
        Ok(PromptTemplate {
            template_id: template_id.to_string(),
            version: hex_prefix(&digest, 12),
            system_text,
            user_template,
            output_schema: schema,
            user_segments,
        })
    }

    pub fn placeholders(&self) -> BTreeSet<&str> {
        self.user_segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(n) => Some(n.as_str()),
                Segment::Text(_) => None,
            })
            .collect()
    }

    /// Fills every placeholder. Substituted text is never re-scanned, so
    /// transcripts containing `{{` are safe.
    pub fn render(&self, req: &StructuredRequest, snippets: &[String]) -> Result<RenderedPrompt> {
        let mut user = String::with_capacity(self.user_template.len() * 2);
        for seg in &self.user_segments {
            match seg {
                Segment::Text(t) => user.push_str(t),
                Segment::Slot(name) => match name.as_str() {
                    CONTEXT => user.push_str(&render_context(snippets)),
                    FEEDBACK => user.push_str(&render_feedback(req.feedback.as_ref())),
                    SCHEMA => user.push_str(&self.output_schema.describe()),
                    other => {
                        let v = req.variables.get(other).ok_or_else(|| {
                            Error::Template(format!(
                                "{}: placeholder {other:?} was not filled",
                                self.template_id
                            ))
                        })?;
                        user.push_str(v);
                    }
                },
            }
        }
        Ok(RenderedPrompt {
            system: self.system_text.clone(),
            user,
            snippets_used: snippets.len(),
        })
    }
}

fn render_context(snippets: &[String]) -> String {
    if snippets.is_empty() {
        return "(no background material available)".into();
    }
    snippets
        .iter()
        .enumerate()
        .map(|(i, s)| format!("[{}] {}", i + 1, s.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn render_feedback(feedback: Option<&Feedback>) -> String {
    match feedback {
        None => String::new(),
        Some(f) => format!(
            "\nYour previous answer was:\n{}\n\nThe researcher reviewed it and asks for the following changes:\n{}\n\nRevise your answer accordingly.\n",
            f.prior_output, f.text
        ),
    }
}

fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>()
        .chars()
        .take(n)
        .collect()
}

/// The researcher's critique plus the answer it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub text: String,
    pub prior_output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredRequest {
    pub template_id: String,
    pub variables: BTreeMap<String, String>,
    #[serde(default)]
    pub context_snippets: Vec<String>,
    #[serde(default)]
    pub feedback: Option<Feedback>,
}

impl StructuredRequest {
    pub fn new(template_id: &str) -> Self {
        StructuredRequest {
            template_id: template_id.to_string(),
            variables: BTreeMap::new(),
            context_snippets: Vec::new(),
            feedback: None,
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn snippets(mut self, snippets: Vec<String>) -> Self {
        self.context_snippets = snippets;
        self
    }

    /// Stable digest over template id, variables, snippets and feedback.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("request serializes");
        hex_prefix(&Sha256::digest(&canonical), 16)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
    pub snippets_used: usize,
}

impl RenderedPrompt {
    pub fn char_len(&self) -> usize {
        self.system.chars().count() + self.user.chars().count()
    }
}

#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(id, text)| {
                let t = PromptTemplate::parse(id, text).expect("builtin template parses");
                (id.to_string(), t)
            })
            .collect();
        TemplateRegistry { templates }
    }

    /// Builtins, with any `<template_id>.txt` in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut reg = Self::builtin();
        for id in ids::ALL {
            let path = dir.join(format!("{id}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                reg.templates.insert(id.to_string(), PromptTemplate::parse(id, &text)?);
            }
        }
        Ok(reg)
    }

    pub fn get(&self, template_id: &str) -> Result<&PromptTemplate> {
        self.templates
            .get(template_id)
            .ok_or_else(|| Error::NotFound(format!("template {template_id}")))
    }

    /// Renders `req`, dropping context snippets from the tail until the
    /// prompt fits in `budget_chars`.
    pub fn render_within(&self, req: &StructuredRequest, budget_chars: usize) -> Result<RenderedPrompt> {
        let template = self.get(&req.template_id)?;
        let mut keep = req.context_snippets.len();
        loop {
            let prompt = template.render(req, &req.context_snippets[..keep])?;
            if prompt.char_len() <= budget_chars {
                return Ok(prompt);
            }
            if keep == 0 {
                return Err(Error::Template(format!(
                    "{}: prompt of {} chars exceeds budget of {budget_chars}",
                    req.template_id,
                    prompt.char_len()
                )));
            }
            keep -= 1;
        }
    }
}
