//! The six-phase workspace state machine.
//!
//! Every change is a [`Mutation`] applied through [`Workspace::apply`]. The
//! mutation runs against a copy; the copy replaces the live state only when
//! the whole mutation succeeded, so a failure leaves nothing half-done.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use ulid::Ulid;

use super::buckets::BucketEdit;
use super::model::*;
use super::phase::{Phase, PhaseState, PhaseTable};
use super::quote::QuoteIndex;
use crate::context::{ContextStore, DocumentKind, DEFAULT_CHUNK_CHARS, DEFAULT_OVERLAP_CHARS};
use crate::error::{Error, Result};
use crate::ingest::{apply_filter, load_ndjson, load_textfiles, parse_ndjson, Corpus, CorpusFilter};
use crate::llm::{Gateway, ProviderConfig};

pub const FORMAT_VERSION: u32 = 1;

/// Where a workspace's corpus comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// NDJSON dump on the service's filesystem, optionally zstd-compressed.
    Ndjson { path: PathBuf, subreddit: String },
    /// NDJSON lines carried in the request itself.
    InlineNdjson { text: String, subreddit: String },
    TextFiles { paths: Vec<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSpec {
    pub workspace_id: String,
    #[serde(default)]
    pub name: String,
    pub source: Source,
    #[serde(default)]
    pub filter: CorpusFilter,
    #[serde(default)]
    pub config: Option<ProviderConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub workspace_id: String,
    pub name: String,
    pub created_at: i64,
    pub source_descriptor: String,
    pub config: ProviderConfig,
    /// Number of mutations committed so far.
    pub seq: u64,
}

/// Every phase payload plus the status table. This is what snapshots
/// capture and restore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseData {
    pub states: PhaseTable,
    pub background: BackgroundPayload,
    pub load: LoadDataPayload,
    pub coding: CodingPayload,
    pub review: BucketPayload,
    pub themes: BucketPayload,
    pub report: ReportPayload,
}

impl Default for PhaseData {
    fn default() -> Self {
        PhaseData {
            states: PhaseTable::default(),
            background: BackgroundPayload::default(),
            load: LoadDataPayload::default(),
            coding: CodingPayload::default(),
            review: BucketPayload::fresh("rc"),
            themes: BucketPayload::fresh("th"),
            report: ReportPayload::default(),
        }
    }
}

impl BucketPayload {
    pub(crate) fn fresh(prefix: &str) -> Self {
        BucketPayload {
            buckets: super::buckets::BucketSet::new(prefix),
            ..Default::default()
        }
    }
}

impl PhaseData {
    /// A phase's state with a payload separately serialized, as stored in
    /// `phases/phase<N>.json`.
    pub fn phase_file(&self, p: Phase) -> Result<Value> {
        let payload = match p {
            Phase::Background => serde_json::to_value(&self.background)?,
            Phase::LoadData => serde_json::to_value(&self.load)?,
            Phase::Coding => serde_json::to_value(&self.coding)?,
            Phase::Review => serde_json::to_value(&self.review)?,
            Phase::Themes => serde_json::to_value(&self.themes)?,
            Phase::Report => serde_json::to_value(&self.report)?,
        };
        Ok(serde_json::json!({ "state": self.states.get(p), "payload": payload }))
    }

    pub fn from_phase_files(files: &BTreeMap<Phase, Value>) -> Result<PhaseData> {
        let mut data = PhaseData::default();
        let mut states = Vec::new();
        for p in Phase::ALL {
            let v = files
                .get(&p)
                .ok_or_else(|| Error::Corrupt(format!("phase {p} file missing")))?;
            let state: PhaseState = serde_json::from_value(v["state"].clone())
                .map_err(|e| Error::Corrupt(format!("phase {p} state: {e}")))?;
            let payload = v["payload"].clone();
            let bad = |e: serde_json::Error| Error::Corrupt(format!("phase {p} payload: {e}"));
            match p {
                Phase::Background => data.background = serde_json::from_value(payload).map_err(bad)?,
                Phase::LoadData => data.load = serde_json::from_value(payload).map_err(bad)?,
                Phase::Coding => data.coding = serde_json::from_value(payload).map_err(bad)?,
                Phase::Review => data.review = serde_json::from_value(payload).map_err(bad)?,
                Phase::Themes => data.themes = serde_json::from_value(payload).map_err(bad)?,
                Phase::Report => data.report = serde_json::from_value(payload).map_err(bad)?,
            }
            states.push(state);
        }
        data.states = PhaseTable::try_from(states).map_err(Error::Corrupt)?;
        Ok(data)
    }

    /// Stale phases, counting an outdated concept outline as phase 1.
    pub fn stale_phases(&self) -> Vec<Phase> {
        let mut out = self.states.stale_phases();
        if self.background.outline_stale && !out.contains(&Phase::Background) {
            out.insert(0, Phase::Background);
        }
        out
    }

    pub fn is_stale(&self, p: Phase) -> bool {
        self.states.get(p).stale || (p == Phase::Background && self.background.outline_stale)
    }

    /// Whether phase `p` holds everything later phases need.
    pub fn is_complete(&self, p: Phase) -> bool {
        match p {
            Phase::Background => !self.background.outline.is_empty(),
            Phase::LoadData => !self.load.sample_ids.is_empty(),
            Phase::Coding => self.coding.is_complete(),
            Phase::Review => !self.review.buckets.buckets.is_empty(),
            Phase::Themes => !self.themes.buckets.buckets.is_empty(),
            Phase::Report => !self.states.get(Phase::Report).is_empty(),
        }
    }

    /// Running `q` needs every earlier phase complete and fresh.
    pub fn require_ready(&self, q: Phase) -> Result<()> {
        if let Some(p) = q.upstream().find(|p| !self.is_complete(*p)) {
            return Err(Error::PhaseOrder(format!(
                "phase {p} ({}) must be completed before phase {q} ({})",
                p.name(),
                q.name()
            )));
        }
        let stale: Vec<Phase> = q.upstream().filter(|p| self.is_stale(*p)).collect();
        if !stale.is_empty() {
            return Err(Error::StaleUpstream(stale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub snapshot_id: String,
    pub taken_at: i64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ConceptEdit {
    Rename { concept_id: String, label: String },
    Add { label: String },
    Delete { concept_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CodebookEdit {
    Rename { code_id: String, label: String },
    Redefine { code_id: String, definition: String },
    Add { label: String, definition: String },
    Delete { code_id: String },
    /// Folds `code_ids` into `into`; their applications are re-linked.
    Merge { code_ids: Vec<String>, into: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ApplicationEdit {
    /// Either `code_id` names an existing code, or `label` selects (case
    /// insensitively) or creates one.
    Add {
        post_id: String,
        #[serde(default)]
        code_id: Option<String>,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        definition: Option<String>,
        quote: String,
        #[serde(default)]
        explanation: String,
    },
    Edit {
        application_id: String,
        #[serde(default)]
        code_id: Option<String>,
        #[serde(default)]
        quote: Option<String>,
        #[serde(default)]
        explanation: Option<String>,
    },
    Delete { application_id: String },
}

/// Every state change a workspace accepts. Serialized into the audit log,
/// which makes a workspace reproducible by replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Mutation {
    AddContext { kind: DocumentKind, text: String },
    GenerateConcepts,
    EditConcepts { edit: ConceptEdit },
    SelectConcepts { concept_ids: BTreeSet<String> },
    GenerateOutline,
    EditOutline { concept_id: String, definition: String },
    LoadData {
        #[serde(default)]
        sample_size: Option<usize>,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        filter: Option<CorpusFilter>,
    },
    InitialCoding,
    DeriveCodebook,
    GlobalCoding,
    EditCodebook { edit: CodebookEdit },
    EditApplication { edit: ApplicationEdit },
    ClusterCodes,
    EditClusters { edit: BucketEdit },
    RedoClusters { feedback: String },
    GenerateThemes,
    EditThemes { edit: BucketEdit },
    RedoThemes { feedback: String },
    BuildReport {
        #[serde(default)]
        organization: Organization,
    },
    Snapshot {
        #[serde(default)]
        reason: Option<String>,
    },
    Restore { snapshot_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Machine,
    Human,
}

impl Mutation {
    pub fn phase(&self) -> Option<Phase> {
        use Mutation::*;
        Some(match self {
            AddContext { .. } | GenerateConcepts | EditConcepts { .. } | SelectConcepts { .. } => Phase::Background,
            GenerateOutline | EditOutline { .. } => Phase::Background,
            LoadData { .. } => Phase::LoadData,
            InitialCoding | DeriveCodebook | GlobalCoding | EditCodebook { .. } | EditApplication { .. } => Phase::Coding,
            ClusterCodes | EditClusters { .. } | RedoClusters { .. } => Phase::Review,
            GenerateThemes | EditThemes { .. } | RedoThemes { .. } => Phase::Themes,
            BuildReport { .. } => Phase::Report,
            Snapshot { .. } | Restore { .. } => return None,
        })
    }

    pub fn actor(&self) -> Actor {
        use Mutation::*;
        match self {
            GenerateConcepts | GenerateOutline | LoadData { .. } | InitialCoding | DeriveCodebook | GlobalCoding
            | ClusterCodes | RedoClusters { .. } | GenerateThemes | RedoThemes { .. } | BuildReport { .. } => {
                Actor::Machine
            }
            _ => Actor::Human,
        }
    }

    /// Machine regenerations are preceded by an automatic snapshot.
    pub fn regenerates(&self) -> bool {
        self.actor() == Actor::Machine
    }

    pub fn operation(&self) -> &'static str {
        use Mutation::*;
        match self {
            AddContext { .. } => "add_context",
            GenerateConcepts => "generate_concepts",
            EditConcepts { .. } => "edit_concepts",
            SelectConcepts { .. } => "select_concepts",
            GenerateOutline => "generate_outline",
            EditOutline { .. } => "edit_outline",
            LoadData { .. } => "load_data",
            InitialCoding => "initial_coding",
            DeriveCodebook => "derive_codebook",
            GlobalCoding => "global_coding",
            EditCodebook { .. } => "edit_codebook",
            EditApplication { .. } => "edit_application",
            ClusterCodes => "cluster_codes",
            EditClusters { .. } => "edit_clusters",
            RedoClusters { .. } => "redo_clusters",
            GenerateThemes => "generate_themes",
            EditThemes { .. } => "edit_themes",
            RedoThemes { .. } => "redo_themes",
            BuildReport { .. } => "build_report",
            Snapshot { .. } => "snapshot",
            Restore { .. } => "restore",
        }
    }

    /// The machine run for `phase`, with an optional named step.
    pub fn run(phase: Phase, step: Option<&str>) -> Result<Mutation> {
        let bad = |s: &str| Error::InvalidArgument(format!("phase {phase} has no step {s:?}"));
        Ok(match (phase, step) {
            (Phase::Background, None | Some("concepts")) => Mutation::GenerateConcepts,
            (Phase::Background, Some("outline")) => Mutation::GenerateOutline,
            (Phase::LoadData, None | Some("split")) => Mutation::LoadData {
                sample_size: None,
                seed: None,
                filter: None,
            },
            (Phase::Coding, None | Some("initial")) => Mutation::InitialCoding,
            (Phase::Coding, Some("codebook")) => Mutation::DeriveCodebook,
            (Phase::Coding, Some("global")) => Mutation::GlobalCoding,
            (Phase::Review, None) => Mutation::ClusterCodes,
            (Phase::Themes, None) => Mutation::GenerateThemes,
            (Phase::Report, None) => Mutation::BuildReport {
                organization: Organization::ThemeAndCode,
            },
            (_, Some(s)) => return Err(bad(s)),
        })
    }

    /// The redo-with-feedback mutation for phases 4 and 5.
    pub fn redo(phase: Phase, feedback: String) -> Result<Mutation> {
        match phase {
            Phase::Review => Ok(Mutation::RedoClusters { feedback }),
            Phase::Themes => Ok(Mutation::RedoThemes { feedback }),
            _ => Err(Error::InvalidArgument(format!("phase {phase} has no redo"))),
        }
    }
}

/// What one mutation did beyond its payload change.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub newly_stale: Vec<Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SnapshotMeta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

pub fn no_progress(_: usize, _: usize) {}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub manifest: Manifest,
    pub corpus: Arc<Corpus>,
    pub context: ContextStore,
    pub data: PhaseData,
    pub snapshots: Vec<SnapshotMeta>,
    snapshot_bodies: BTreeMap<String, Arc<PhaseData>>,
}

/// Retrieval depth for prompt grounding.
pub const RETRIEVAL_K: usize = 8;
pub const DEFAULT_SAMPLE_SIZE: usize = 30;

impl Workspace {
    pub fn create(spec: &CreateSpec, at: i64) -> Result<Workspace> {
        spec.filter.validate()?;
        if spec.workspace_id.trim().is_empty()
            || !spec
                .workspace_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::InvalidArgument(format!(
                "workspace id {:?} must be non-empty ASCII letters, digits, '-' or '_'",
                spec.workspace_id
            )));
        }
        let config = spec.config.clone().unwrap_or_else(ProviderConfig::mock);
        config.validate()?;
        let raw = match &spec.source {
            Source::Ndjson { path, subreddit } => load_ndjson(path, subreddit)?,
            Source::InlineNdjson { text, subreddit } => {
                parse_ndjson(BufReader::new(text.as_bytes()), subreddit, format!("inline:r/{subreddit}"))?
            }
            Source::TextFiles { paths } => load_textfiles(paths)?,
        };
        let corpus = if spec.filter.is_noop() {
            raw
        } else {
            apply_filter(&raw, &spec.filter)?
        };
        if corpus.is_empty() {
            return Err(Error::EmptyInput("no transcripts remain after filtering".into()));
        }
        Ok(Workspace::from_parts(
            Manifest {
                format_version: FORMAT_VERSION,
                workspace_id: spec.workspace_id.clone(),
                name: spec.name.clone(),
                created_at: at,
                source_descriptor: corpus.source_descriptor.clone(),
                config,
                seq: 0,
            },
            corpus,
            ContextStore::new(DEFAULT_CHUNK_CHARS, DEFAULT_OVERLAP_CHARS),
            PhaseData::default(),
            Vec::new(),
            BTreeMap::new(),
        ))
    }

    pub fn from_parts(
        manifest: Manifest,
        corpus: Corpus,
        context: ContextStore,
        data: PhaseData,
        snapshots: Vec<SnapshotMeta>,
        bodies: BTreeMap<String, PhaseData>,
    ) -> Workspace {
        Workspace {
            manifest,
            corpus: Arc::new(corpus),
            context,
            data,
            snapshots,
            snapshot_bodies: bodies.into_iter().map(|(k, v)| (k, Arc::new(v))).collect(),
        }
    }

    pub fn id(&self) -> &str {
        &self.manifest.workspace_id
    }

    pub fn snapshot_body(&self, id: &str) -> Option<&PhaseData> {
        self.snapshot_bodies.get(id).map(Arc::as_ref)
    }

    /// Applies one mutation atomically at logical time `at`.
    pub fn apply(&mut self, m: &Mutation, at: i64, gw: &Gateway, progress: Progress<'_>) -> Result<Outcome> {
        let mut draft = self.clone();
        let mut out = Outcome::default();
        if m.regenerates() {
            out.snapshot = Some(draft.take_snapshot(at, m.operation()));
        }
        draft.dispatch(m, at, gw, progress, &mut out)?;
        draft.manifest.seq += 1;
        *self = draft;
        Ok(out)
    }

    fn dispatch(&mut self, m: &Mutation, at: i64, gw: &Gateway, progress: Progress<'_>, out: &mut Outcome) -> Result<()> {
        use Mutation::*;
        match m {
            AddContext { kind, text } => self.add_context(*kind, text, at, gw, out),
            GenerateConcepts => self.generate_concepts(at, gw, out),
            EditConcepts { edit } => self.edit_concepts(edit, at, out),
            SelectConcepts { concept_ids } => self.select_concepts(concept_ids, at, out),
            GenerateOutline => self.generate_outline(at, gw, out),
            EditOutline { concept_id, definition } => self.edit_outline(concept_id, definition, at, out),
            LoadData { sample_size, seed, filter } => self.load_data(*sample_size, *seed, filter.as_ref(), at, out),
            InitialCoding => self.initial_coding(at, gw, progress, out),
            DeriveCodebook => self.derive_codebook(at, gw, out),
            GlobalCoding => self.global_coding(at, gw, progress, out),
            EditCodebook { edit } => self.edit_codebook(edit, at, out),
            EditApplication { edit } => self.edit_application(edit, at, out),
            ClusterCodes => self.cluster_codes(None, at, gw, out),
            RedoClusters { feedback } => self.cluster_codes(Some(feedback), at, gw, out),
            EditClusters { edit } => self.edit_buckets(Phase::Review, edit, at, out),
            GenerateThemes => self.generate_themes(None, at, gw, out),
            RedoThemes { feedback } => self.generate_themes(Some(feedback), at, gw, out),
            EditThemes { edit } => self.edit_buckets(Phase::Themes, edit, at, out),
            BuildReport { organization } => self.build_report_phase(*organization, at, out),
            Snapshot { reason } => {
                out.snapshot = Some(self.take_snapshot(at, reason.as_deref().unwrap_or("manual")));
                Ok(())
            }
            Restore { snapshot_id } => self.restore(snapshot_id),
        }
    }

    fn take_snapshot(&mut self, at: i64, reason: &str) -> SnapshotMeta {
        let body = serde_json::to_vec(&self.data).expect("phase data serializes");
        let digest = Sha256::digest(&body);
        let hash48 = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes")) >> 16;
        let counter = (self.snapshots.len() as u128 & 0xffff_ffff) << 48;
        let id = Ulid::from_parts(at.max(0) as u64, counter | u128::from(hash48)).to_string();
        let meta = SnapshotMeta {
            snapshot_id: id.clone(),
            taken_at: at,
            reason: reason.to_string(),
        };
        self.snapshots.push(meta.clone());
        self.snapshot_bodies.insert(id, Arc::new(self.data.clone()));
        meta
    }

    fn restore(&mut self, id: &str) -> Result<()> {
        let body = self
            .snapshot_bodies
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("snapshot {id}")))?;
        self.data = body.as_ref().clone();
        Ok(())
    }

    /// Records a human edit of `p` and flags everything downstream.
    pub(crate) fn human_edit(&mut self, p: Phase, at: i64, out: &mut Outcome) {
        self.data.states.get_mut(p).human_edited(at);
        out.newly_stale.extend(self.data.states.propagate_forward(p));
    }

    /// Records a fresh machine result for `p`, clearing its stale flag.
    pub(crate) fn machine_result(&mut self, p: Phase, at: i64, out: &mut Outcome) {
        self.data.states.get_mut(p).machine_produced(at);
        out.newly_stale.extend(self.data.states.propagate_forward(p));
    }

    fn add_context(&mut self, kind: DocumentKind, text: &str, at: i64, gw: &Gateway, out: &mut Outcome) -> Result<()> {
        let before = self.context.documents().len();
        let doc_id = self.context.add_document(kind, text, at, gw.embedder())?;
        out.details = serde_json::json!({ "doc_id": doc_id });
        if self.context.documents().len() == before {
            return Ok(());
        }
        let s = self.data.states.get_mut(Phase::Background);
        if !s.is_empty() && !s.stale {
            s.stale = true;
            out.newly_stale.push(Phase::Background);
        }
        if !self.data.states.get(Phase::Background).is_empty() {
            out.newly_stale.extend(self.data.states.propagate_forward(Phase::Background));
        }
        Ok(())
    }

    fn load_data(
        &mut self,
        sample_size: Option<usize>,
        seed: Option<u64>,
        filter: Option<&CorpusFilter>,
        at: i64,
        out: &mut Outcome,
    ) -> Result<()> {
        self.data.require_ready(Phase::LoadData)?;
        let filter = filter.cloned().unwrap_or_default();
        let filtered = apply_filter(&self.corpus, &filter)?;
        if filtered.is_empty() {
            return Err(Error::PreconditionFailed("filter leaves no transcripts".into()));
        }
        let size = sample_size.unwrap_or(DEFAULT_SAMPLE_SIZE.min(filtered.len()));
        let seed = seed.unwrap_or(0);
        let (sample, rest) = crate::ingest::split_corpus(&filtered, size, seed)?;
        self.data.load = LoadDataPayload {
            filter,
            sample_size: size,
            seed,
            post_ids: filtered.post_ids().map(str::to_string).collect(),
            sample_ids: sample.post_ids().map(str::to_string).collect(),
            remainder_ids: rest.post_ids().map(str::to_string).collect(),
        };
        out.details = serde_json::json!({
            "transcripts": filtered.len(),
            "sample": sample.len(),
            "remainder": rest.len(),
        });
        self.machine_result(Phase::LoadData, at, out);
        Ok(())
    }

    /// Text used to ground a prompt in the context store.
    pub(crate) fn snippets_for(&self, query: &str, gw: &Gateway) -> Result<Vec<String>> {
        if self.context.is_empty() || query.trim().is_empty() {
            return Ok(Vec::new());
        }
        Ok(self
            .context
            .retrieve(query, RETRIEVAL_K, gw.embedder())?
            .into_iter()
            .map(|r| r.chunk.text)
            .collect())
    }

    pub(crate) fn research_questions_var(&self) -> String {
        let rqs = self.context.research_questions();
        crate::llm::vars::nested_lines(rqs.into_iter().map(|q| (q, std::iter::empty())))
    }

    /// Full consistency check, used by tests, fuzzers and on load.
    pub fn check_invariants(&self) -> Result<()> {
        let d = &self.data;
        let bad = |m: String| Err(Error::Corrupt(m));

        let mut labels = BTreeSet::new();
        for c in &d.background.concepts {
            if !labels.insert(label_key(&c.label)) {
                return bad(format!("concept label {:?} repeated", c.label));
            }
        }
        if !d.background.outline_stale {
            for e in &d.background.outline {
                if !d.background.concept(&e.concept_id).is_some_and(|c| c.selected) {
                    return bad(format!("outline entry for unselected concept {}", e.concept_id));
                }
            }
        }

        let mut code_labels = BTreeSet::new();
        for c in &d.coding.codebook {
            if c.label.trim().is_empty() || !code_labels.insert(label_key(&c.label)) {
                return bad(format!("code label {:?} empty or repeated", c.label));
            }
        }
        let codes = d.coding.code_ids();
        let mut indexes: BTreeMap<&str, QuoteIndex> = BTreeMap::new();
        for a in &d.coding.applications {
            if !codes.contains(&a.code_id) {
                return bad(format!("application {} references missing code {}", a.application_id, a.code_id));
            }
            let Some(t) = self.corpus.get(&a.post_id) else {
                return bad(format!("application {} references missing post {}", a.application_id, a.post_id));
            };
            let idx = indexes.entry(t.post_id.as_str()).or_insert_with(|| QuoteIndex::new(t));
            if !a.verified || !idx.contains(&a.quote).unwrap_or(false) {
                return bad(format!("application {} quote not found in {}", a.application_id, a.post_id));
            }
        }
        for (p, payload) in [(Phase::Review, &d.review), (Phase::Themes, &d.themes)] {
            if !d.states.get(p).is_empty() {
                payload
                    .buckets
                    .check_partition(&codes)
                    .map_err(|e| Error::Corrupt(format!("phase {p}: {e}")))?;
            }
        }
        Ok(())
    }
}
