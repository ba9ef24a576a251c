use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::atomic::append_line;
use crate::error::{Error, Result};
use crate::llm::Gateway;
use crate::pipeline::{Actor, CreateSpec, Mutation, Phase, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AuditRecord {
    Create { spec: CreateSpec },
    Mutation { mutation: Mutation },
}

/// One line of `audit.log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp: i64,
    pub actor: Actor,
    pub operation: String,
    pub phase: Option<Phase>,
    #[serde(flatten)]
    pub record: AuditRecord,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

pub(crate) fn append(path: &Path, entry: &AuditEntry) -> Result<()> {
    append_line(path, &serde_json::to_vec(entry)?)
}

/// Parses the log. A torn final line (no trailing newline) is reported as
/// corruption rather than silently dropped.
pub fn read_audit(path: &Path) -> Result<Vec<AuditEntry>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: AuditEntry = serde_json::from_str(&line)
            .map_err(|e| Error::Corrupt(format!("{} line {}: {e}", path.display(), n + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

/// Rebuilds a workspace from its log alone.
pub fn replay(entries: &[AuditEntry], gw: &Gateway) -> Result<Workspace> {
    let (first, rest) = entries
        .split_first()
        .ok_or_else(|| Error::EmptyInput("audit log is empty".into()))?;
    let AuditRecord::Create { spec } = &first.record else {
        return Err(Error::Corrupt("audit log does not start with a create record".into()));
    };
    let mut ws = Workspace::create(spec, first.timestamp)?;
    let quiet = |_: usize, _: usize| {};
    for e in rest {
        let AuditRecord::Mutation { mutation } = &e.record else {
            return Err(Error::Corrupt(format!("second create record at seq {}", e.seq)));
        };
        ws.apply(mutation, e.timestamp, gw, &quiet)?;
        if ws.manifest.seq != e.seq {
            return Err(Error::Corrupt(format!("replay reached seq {} at entry {}", ws.manifest.seq, e.seq)));
        }
    }
    Ok(ws)
}
