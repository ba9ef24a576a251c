//! On-disk workspaces.
//!
//! ```text
//! <root>/<workspace_id>/
//!   workspace.json        manifest, corpus metadata, snapshot list
//!   corpus.ndjson         one transcript per line
//!   context/index.json    documents, chunks and vectors
//!   phases/phase<N>.json  state and payload of phase N
//!   snapshots/<ulid>.json phase data captured by a snapshot
//!   audit.log             one JSON line per committed mutation
//! ```
//!
//! Every file is replaced by write-temp, fsync, rename. The audit line is
//! appended last, so an acknowledged mutation is fully on disk.

mod atomic;
mod audit;

pub use atomic::write_atomic;
pub use audit::{read_audit, replay, AuditEntry, AuditRecord};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context::ContextStore;
use crate::error::{Error, Result};
use crate::ingest::{Corpus, CorpusFilter, IngestStats};
use crate::llm::Gateway;
use crate::pipeline::{CreateSpec, Manifest, Mutation, Outcome, Phase, PhaseData, Progress, SnapshotMeta, Workspace};

pub const MANIFEST_FILE: &str = "workspace.json";
pub const CORPUS_FILE: &str = "corpus.ndjson";
pub const CONTEXT_FILE: &str = "context/index.json";
pub const AUDIT_FILE: &str = "audit.log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CorpusMeta {
    source_descriptor: String,
    filter_applied: CorpusFilter,
    stats: IngestStats,
    transcripts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestFile {
    manifest: Manifest,
    corpus: CorpusMeta,
    snapshots: Vec<SnapshotMeta>,
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn phase_path(dir: &Path, p: Phase) -> PathBuf {
    dir.join("phases").join(format!("phase{}.json", p.number()))
}

fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("snapshots").join(format!("{id}.json"))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))
}

/// One workspace directory.
#[derive(Debug, Clone)]
pub struct WorkspaceDir {
    pub path: PathBuf,
}

impl WorkspaceDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        WorkspaceDir { path: path.into() }
    }

    fn write_manifest(&self, ws: &Workspace) -> Result<()> {
        let file = ManifestFile {
            manifest: ws.manifest.clone(),
            corpus: CorpusMeta {
                source_descriptor: ws.corpus.source_descriptor.clone(),
                filter_applied: ws.corpus.filter_applied.clone(),
                stats: ws.corpus.stats.clone(),
                transcripts: ws.corpus.len(),
            },
            snapshots: ws.snapshots.clone(),
        };
        write_atomic(&self.path.join(MANIFEST_FILE), &pretty(&file)?)
    }

    fn write_phases(&self, data: &PhaseData) -> Result<()> {
        for p in Phase::ALL {
            write_atomic(&phase_path(&self.path, p), &pretty(&data.phase_file(p)?)?)?;
        }
        Ok(())
    }

    fn write_context(&self, ctx: &ContextStore) -> Result<()> {
        write_atomic(&self.path.join(CONTEXT_FILE), &pretty(ctx)?)
    }

    /// Writes a brand-new workspace and its creation record.
    pub fn initialize(&self, ws: &Workspace, spec: &CreateSpec) -> Result<()> {
        if self.path.join(MANIFEST_FILE).exists() {
            return Err(Error::NameConflict(format!("workspace {} already exists", ws.id())));
        }
        fs::create_dir_all(&self.path).map_err(|e| Error::io(&self.path, e))?;
        write_atomic(&self.path.join(CORPUS_FILE), ws.corpus.to_ndjson()?.as_bytes())?;
        self.write_context(&ws.context)?;
        self.write_phases(&ws.data)?;
        self.write_manifest(ws)?;
        audit::append(
            &self.path.join(AUDIT_FILE),
            &AuditEntry {
                seq: 0,
                timestamp: ws.manifest.created_at,
                actor: crate::pipeline::Actor::Human,
                operation: "create".into(),
                phase: None,
                record: AuditRecord::Create { spec: spec.clone() },
                details: serde_json::Value::Null,
            },
        )
    }

    /// Persists the effects of one committed mutation, then logs it.
    pub fn commit(&self, ws: &Workspace, m: &Mutation, at: i64, outcome: &Outcome) -> Result<()> {
        if let Some(s) = &outcome.snapshot {
            let body = ws
                .snapshot_body(&s.snapshot_id)
                .ok_or_else(|| Error::Corrupt(format!("snapshot {} missing in memory", s.snapshot_id)))?;
            write_atomic(&snapshot_path(&self.path, &s.snapshot_id), &pretty(body)?)?;
        }
        if matches!(m, Mutation::AddContext { .. }) {
            self.write_context(&ws.context)?;
        }
        self.write_phases(&ws.data)?;
        self.write_manifest(ws)?;
        audit::append(
            &self.path.join(AUDIT_FILE),
            &AuditEntry {
                seq: ws.manifest.seq,
                timestamp: at,
                actor: m.actor(),
                operation: m.operation().into(),
                phase: m.phase(),
                record: AuditRecord::Mutation { mutation: m.clone() },
                details: serde_json::to_value(outcome)?,
            },
        )
    }

    /// Applies `m` to a copy of `ws`, persists it, and only then swaps it in.
    pub fn apply(
        &self,
        ws: &mut Workspace,
        m: &Mutation,
        at: i64,
        gw: &Gateway,
        progress: Progress<'_>,
    ) -> Result<Outcome> {
        let mut next = ws.clone();
        let outcome = next.apply(m, at, gw, progress)?;
        self.commit(&next, m, at, &outcome)?;
        *ws = next;
        Ok(outcome)
    }

    /// Replays `entries` into this (empty) directory, persisting each step
    /// exactly as the original service did.
    pub fn replay_from(&self, entries: &[AuditEntry], gw: &Gateway) -> Result<Workspace> {
        let (first, rest) = entries
            .split_first()
            .ok_or_else(|| Error::EmptyInput("audit log is empty".into()))?;
        let AuditRecord::Create { spec } = &first.record else {
            return Err(Error::Corrupt("audit log does not start with a create record".into()));
        };
        let mut ws = Workspace::create(spec, first.timestamp)?;
        self.initialize(&ws, spec)?;
        for e in rest {
            let AuditRecord::Mutation { mutation } = &e.record else {
                return Err(Error::Corrupt(format!("second create record at seq {}", e.seq)));
            };
            self.apply(&mut ws, mutation, e.timestamp, gw, &crate::pipeline::no_progress)?;
        }
        Ok(ws)
    }

    /// Reads the manifest alone; works even when other files are damaged.
    pub fn manifest(&self) -> Result<Manifest> {
        let f: ManifestFile = parse(&self.path.join(MANIFEST_FILE))?;
        Ok(f.manifest)
    }

    pub fn load(&self) -> Result<Workspace> {
        let f: ManifestFile = parse(&self.path.join(MANIFEST_FILE))?;
        if f.manifest.format_version != crate::pipeline::FORMAT_VERSION {
            return Err(Error::Corrupt(format!("unsupported format version {}", f.manifest.format_version)));
        }
        let corpus_path = self.path.join(CORPUS_FILE);
        let text = String::from_utf8(read(&corpus_path)?)
            .map_err(|_| Error::Corrupt(format!("{} is not UTF-8", corpus_path.display())))?;
        let mut corpus = Corpus::from_ndjson(&text, f.corpus.source_descriptor.clone())
            .map_err(|e| Error::Corrupt(format!("{}: {e}", corpus_path.display())))?;
        if corpus.len() != f.corpus.transcripts {
            return Err(Error::Corrupt(format!(
                "corpus holds {} transcripts, manifest says {}",
                corpus.len(),
                f.corpus.transcripts
            )));
        }
        corpus.filter_applied = f.corpus.filter_applied;
        corpus.stats = f.corpus.stats;
        let context: ContextStore = parse(&self.path.join(CONTEXT_FILE))?;
        context.verify()?;
        let mut files = BTreeMap::new();
        for p in Phase::ALL {
            files.insert(p, parse::<serde_json::Value>(&phase_path(&self.path, p))?);
        }
        let data = PhaseData::from_phase_files(&files)?;
        let mut bodies = BTreeMap::new();
        for s in &f.snapshots {
            bodies.insert(s.snapshot_id.clone(), parse::<PhaseData>(&snapshot_path(&self.path, &s.snapshot_id))?);
        }
        let ws = Workspace::from_parts(f.manifest, corpus, context, data, f.snapshots, bodies);
        ws.check_invariants()?;
        let logged = read_audit(&self.path.join(AUDIT_FILE))?;
        let last = logged.last().map(|e| e.seq).unwrap_or(0);
        if last != ws.manifest.seq {
            return Err(Error::Corrupt(format!(
                "audit log ends at mutation {last} but the manifest records {}",
                ws.manifest.seq
            )));
        }
        Ok(ws)
    }

    pub fn audit(&self) -> Result<Vec<AuditEntry>> {
        read_audit(&self.path.join(AUDIT_FILE))
    }

    /// Every persisted file with its bytes, keyed by relative path. Two
    /// workspaces with equal serializations compare equal here.
    pub fn serialization(&self) -> Result<BTreeMap<String, Vec<u8>>> {
        let mut out = BTreeMap::new();
        collect_files(&self.path, &self.path, &mut out)?;
        Ok(out)
    }
}

fn collect_files(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(base, &path, out)?;
        } else if !path.extension().is_some_and(|x| x == "tmp") {
            let rel = path.strip_prefix(base).expect("under base").to_string_lossy().replace('\\', "/");
            out.insert(rel, read(&path)?);
        }
    }
    Ok(())
}

/// The data root holding one directory per workspace.
#[derive(Debug, Clone)]
pub struct DataRoot {
    pub path: PathBuf,
}

impl DataRoot {
    pub fn new(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
        Ok(DataRoot { path })
    }

    pub fn dir(&self, workspace_id: &str) -> WorkspaceDir {
        WorkspaceDir::new(self.path.join(workspace_id))
    }

    /// Workspace ids on disk, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.path).map_err(|e| Error::io(&self.path, e))? {
            let entry = entry.map_err(|e| Error::io(&self.path, e))?;
            if entry.path().join(MANIFEST_FILE).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn delete(&self, workspace_id: &str) -> Result<()> {
        let dir = self.dir(workspace_id).path;
        if !dir.join(MANIFEST_FILE).exists() {
            return Err(Error::NotFound(format!("workspace {workspace_id}")));
        }
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))
    }
}
