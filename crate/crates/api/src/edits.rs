//! Request bodies of the edit endpoints, shared with the CLI `edit` command.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use taforge_core::pipeline::{ConceptEdit, Mutation};
use taforge_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditTarget {
    Concepts,
    Outline,
    Codebook,
    Applications,
    Clusters,
    Themes,
}

impl FromStr for EditTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "concepts" => EditTarget::Concepts,
            "outline" => EditTarget::Outline,
            "codebook" => EditTarget::Codebook,
            "applications" => EditTarget::Applications,
            "clusters" => EditTarget::Clusters,
            "themes" => EditTarget::Themes,
            other => return Err(Error::InvalidArgument(format!("nothing called {other:?} can be edited"))),
        })
    }
}

#[derive(Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
enum ConceptPatch {
    Select { concept_ids: BTreeSet<String> },
    Rename { concept_id: String, label: String },
    Add { label: String },
    Delete { concept_id: String },
}

#[derive(Deserialize)]
struct OutlinePatch {
    concept_id: String,
    definition: String,
}

fn parse<T: DeserializeOwned>(body: Value) -> Result<T> {
    Ok(serde_json::from_value(body)?)
}

/// Turns an edit body into the mutation it stands for.
pub fn mutation(target: EditTarget, body: Value) -> Result<Mutation> {
    Ok(match target {
        EditTarget::Concepts => match parse(body)? {
            ConceptPatch::Select { concept_ids } => Mutation::SelectConcepts { concept_ids },
            ConceptPatch::Rename { concept_id, label } => Mutation::EditConcepts { edit: ConceptEdit::Rename { concept_id, label } },
            ConceptPatch::Add { label } => Mutation::EditConcepts { edit: ConceptEdit::Add { label } },
            ConceptPatch::Delete { concept_id } => Mutation::EditConcepts { edit: ConceptEdit::Delete { concept_id } },
        },
        EditTarget::Outline => {
            let p: OutlinePatch = parse(body)?;
            Mutation::EditOutline { concept_id: p.concept_id, definition: p.definition }
        }
        EditTarget::Codebook => Mutation::EditCodebook { edit: parse(body)? },
        EditTarget::Applications => Mutation::EditApplication { edit: parse(body)? },
        EditTarget::Clusters => Mutation::EditClusters { edit: parse(body)? },
        EditTarget::Themes => Mutation::EditThemes { edit: parse(body)? },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn bodies_map_to_mutations() {
        let m = mutation(EditTarget::Concepts, json!({ "action": "select", "concept_ids": ["concept-002"] })).unwrap();
        assert_eq!(m.operation(), "select_concepts");
        let m = mutation(EditTarget::Clusters, json!({ "action": "rename", "bucket_id": "rc-01", "name": "x" })).unwrap();
        assert_eq!(m.operation(), "edit_clusters");
        assert!(mutation(EditTarget::Codebook, json!({ "action": "explode" })).is_err());
        assert!("report".parse::<EditTarget>().is_err());
    }
}
