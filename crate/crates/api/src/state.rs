//! Workspaces held by the service, the job table and the clock.
//!
//! Each workspace has one writer lock. Reads clone an `Arc` of the last
//! committed state and never wait on a writer.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use taforge_core::llm::{Gateway, ProviderConfig};
use taforge_core::pipeline::{CreateSpec, Manifest, Mutation, Outcome, Phase, Workspace};
use taforge_core::store::{DataRoot, WorkspaceDir};
use tokio::sync::Semaphore;
use ulid::Ulid;

use crate::config::{ClockMode, ServiceConfig};
use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Succeeded | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobProgress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub workspace_id: String,
    pub operation: String,
    pub phase: Option<Phase>,
    pub status: JobStatus,
    pub progress: JobProgress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    pub created_at: i64,
    pub started_at: Option<i64>,
    pub finished_at: Option<i64>,
}

fn wall_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// Strictly increasing timestamps.
#[derive(Debug)]
pub struct Clock {
    mode: ClockMode,
    last: AtomicI64,
}

impl Clock {
    pub fn new(mode: ClockMode) -> Self {
        Clock { mode, last: AtomicI64::new(0) }
    }

    pub fn now(&self) -> i64 {
        let floor = match self.mode {
            ClockMode::Wall => wall_ms(),
            ClockMode::Logical => 0,
        };
        let mut prev = self.last.load(Ordering::SeqCst);
        loop {
            let next = floor.max(prev + 1);
            match self.last.compare_exchange(prev, next, Ordering::SeqCst, Ordering::SeqCst) {
                Ok(_) => return next,
                Err(actual) => prev = actual,
            }
        }
    }

    /// Never hand out a time at or before `t` again.
    fn advance_past(&self, t: i64) {
        self.last.fetch_max(t, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone)]
pub enum SlotView {
    Ready(Arc<Workspace>),
    Degraded { manifest: Option<Manifest>, reason: String },
}

pub struct Slot {
    pub id: String,
    pub dir: WorkspaceDir,
    view: RwLock<SlotView>,
    writer: Mutex<()>,
    running: Mutex<Option<String>>,
    gateway: ApiResult<Arc<Gateway>>,
}

impl Slot {
    pub fn view(&self) -> SlotView {
        self.view.read().expect("slot lock").clone()
    }

    pub fn ready(&self) -> ApiResult<Arc<Workspace>> {
        match self.view() {
            SlotView::Ready(ws) => Ok(ws),
            SlotView::Degraded { reason, .. } => Err(degraded(&self.id, &reason)),
        }
    }

    pub fn running_job(&self) -> Option<String> {
        self.running.lock().expect("slot lock").clone()
    }

    pub fn gateway(&self) -> ApiResult<&Gateway> {
        self.gateway.as_deref().map_err(Clone::clone)
    }

    fn ensure_idle(&self) -> ApiResult<()> {
        match self.running_job() {
            Some(job) => Err(ApiError::busy(&self.id, Some(&job))),
            None => Ok(()),
        }
    }

    /// Applies and persists one mutation under the writer lock.
    fn commit(
        &self,
        m: &Mutation,
        clock: &Clock,
        progress: &(dyn Fn(usize, usize) + Sync),
    ) -> ApiResult<(Arc<Workspace>, Outcome)> {
        let _w = self.writer.lock().expect("writer lock");
        let mut next = self.ready()?.as_ref().clone();
        let at = clock.now();
        let outcome = next.apply(m, at, self.gateway()?, progress)?;
        if let Err(e) = self.dir.commit(&next, m, at, &outcome) {
            let reason = format!("write failed mid-commit: {e}");
            *self.view.write().expect("slot lock") = SlotView::Degraded {
                manifest: Some(next.manifest.clone()),
                reason,
            };
            return Err(e.into());
        }
        let next = Arc::new(next);
        *self.view.write().expect("slot lock") = SlotView::Ready(next.clone());
        Ok((next, outcome))
    }
}

fn degraded(id: &str, reason: &str) -> ApiError {
    ApiError::new(
        axum::http::StatusCode::CONFLICT,
        "workspace_degraded",
        format!("workspace {id} is degraded and read-only: {reason}"),
    )
}

pub struct App {
    pub config: ServiceConfig,
    pub root: DataRoot,
    pub clock: Clock,
    slots: RwLock<BTreeMap<String, Arc<Slot>>>,
    jobs: Mutex<BTreeMap<String, Job>>,
    workers: Arc<Semaphore>,
}

pub type SharedApp = Arc<App>;

impl App {
    /// Opens the data root and loads every workspace found in it. Damaged
    /// workspaces are kept, flagged degraded.
    pub fn open(config: ServiceConfig) -> taforge_core::Result<SharedApp> {
        let root = DataRoot::new(&config.data_dir)?;
        let app = App {
            clock: Clock::new(config.clock),
            workers: Arc::new(Semaphore::new(config.workers)),
            root,
            config,
            slots: RwLock::new(BTreeMap::new()),
            jobs: Mutex::new(BTreeMap::new()),
        };
        for id in app.root.list()? {
            let dir = app.root.dir(&id);
            let view = match dir.load() {
                Ok(ws) => {
                    app.clock.advance_past(ws.manifest.created_at);
                    for s in &ws.snapshots {
                        app.clock.advance_past(s.taken_at);
                    }
                    SlotView::Ready(Arc::new(ws))
                }
                Err(e) => {
                    tracing::warn!(workspace = %id, error = %e, "workspace degraded");
                    SlotView::Degraded {
                        manifest: dir.manifest().ok(),
                        reason: e.to_string(),
                    }
                }
            };
            if let Ok(log) = dir.audit() {
                if let Some(last) = log.last() {
                    app.clock.advance_past(last.timestamp);
                }
            }
            let slot = app.make_slot(id.clone(), dir, view);
            app.slots.write().expect("slots lock").insert(id, slot);
        }
        Ok(Arc::new(app))
    }

    fn gateway_for(&self, manifest: Option<&Manifest>) -> ApiResult<Arc<Gateway>> {
        let cfg = manifest.map(|m| m.config.clone()).unwrap_or_else(ProviderConfig::mock);
        Ok(Arc::new(Gateway::from_config(cfg, self.config.mock_script.clone())?))
    }

    /// Gateway for requests not tied to a workspace, such as stateless eval.
    pub fn default_gateway(&self) -> ApiResult<Arc<Gateway>> {
        self.gateway_for(None)
    }

    fn make_slot(&self, id: String, dir: WorkspaceDir, view: SlotView) -> Arc<Slot> {
        let gateway = match &view {
            SlotView::Ready(ws) => self.gateway_for(Some(&ws.manifest)),
            SlotView::Degraded { manifest, .. } => self.gateway_for(manifest.as_ref()),
        };
        Arc::new(Slot {
            id,
            dir,
            view: RwLock::new(view),
            writer: Mutex::new(()),
            running: Mutex::new(None),
            gateway,
        })
    }

    pub fn slot(&self, id: &str) -> ApiResult<Arc<Slot>> {
        self.slots
            .read()
            .expect("slots lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::workspace_not_found(id))
    }

    pub fn slots(&self) -> Vec<Arc<Slot>> {
        self.slots.read().expect("slots lock").values().cloned().collect()
    }

    /// Validates and ingests, then writes the new workspace to disk.
    pub fn create(&self, spec: CreateSpec) -> ApiResult<Arc<Workspace>> {
        if self.slots.read().expect("slots lock").contains_key(&spec.workspace_id) {
            return Err(exists(&spec.workspace_id));
        }
        let ws = Workspace::create(&spec, self.clock.now())?;
        let mut slots = self.slots.write().expect("slots lock");
        if slots.contains_key(&spec.workspace_id) {
            return Err(exists(&spec.workspace_id));
        }
        let dir = self.root.dir(&spec.workspace_id);
        dir.initialize(&ws, &spec).map_err(|e| match e {
            taforge_core::Error::NameConflict(_) => exists(&spec.workspace_id),
            other => other.into(),
        })?;
        let ws = Arc::new(ws);
        let slot = self.make_slot(spec.workspace_id.clone(), dir, SlotView::Ready(ws.clone()));
        slots.insert(spec.workspace_id, slot);
        Ok(ws)
    }

    pub fn delete(&self, id: &str) -> ApiResult<()> {
        let slot = self.slot(id)?;
        let _w = slot.writer.lock().expect("writer lock");
        slot.ensure_idle()?;
        self.root.delete(id)?;
        self.slots.write().expect("slots lock").remove(id);
        Ok(())
    }

    /// A synchronous mutation: edits, snapshots, restores, context.
    pub fn mutate(&self, id: &str, m: &Mutation) -> ApiResult<(Arc<Workspace>, Outcome)> {
        let slot = self.slot(id)?;
        slot.ensure_idle()?;
        slot.commit(m, &self.clock, &|_, _| {})
    }

    pub fn job(&self, job_id: &str) -> ApiResult<Job> {
        self.jobs
            .lock()
            .expect("jobs lock")
            .get(job_id)
            .cloned()
            .ok_or_else(|| ApiError::new(axum::http::StatusCode::NOT_FOUND, "job_not_found", format!("no job {job_id:?}")))
    }

    pub fn jobs_of(&self, workspace_id: &str) -> Vec<Job> {
        self.jobs
            .lock()
            .expect("jobs lock")
            .values()
            .filter(|j| j.workspace_id == workspace_id)
            .cloned()
            .collect()
    }

    fn update_job(&self, job_id: &str, f: impl FnOnce(&mut Job)) {
        if let Some(job) = self.jobs.lock().expect("jobs lock").get_mut(job_id) {
            if !job.status.is_terminal() {
                f(job);
            }
        }
    }

    /// Queues a long-running mutation. Cheap preconditions are checked
    /// here so ordering mistakes fail fast with a 409.
    pub fn start_job(self: &Arc<Self>, id: &str, m: Mutation) -> ApiResult<Job> {
        let slot = self.slot(id)?;
        let ws = slot.ready()?;
        preflight(&ws, &m)?;
        let job_id = Ulid::new().to_string();
        {
            let mut running = slot.running.lock().expect("slot lock");
            if let Some(other) = running.as_ref() {
                return Err(ApiError::busy(id, Some(other)));
            }
            *running = Some(job_id.clone());
        }
        let job = Job {
            job_id: job_id.clone(),
            workspace_id: id.to_string(),
            operation: m.operation().to_string(),
            phase: m.phase(),
            status: JobStatus::Queued,
            progress: JobProgress::default(),
            error: None,
            result: None,
            created_at: wall_ms(),
            started_at: None,
            finished_at: None,
        };
        self.jobs.lock().expect("jobs lock").insert(job_id.clone(), job.clone());

        let app = self.clone();
        tokio::spawn(async move {
            let permit = app.workers.clone().acquire_owned().await.expect("worker pool open");
            app.update_job(&job_id, |j| {
                j.status = JobStatus::Running;
                j.started_at = Some(wall_ms());
            });
            let worker = app.clone();
            let jid = job_id.clone();
            let blocking = slot.clone();
            let ran = tokio::task::spawn_blocking(move || {
                let report = |done: usize, total: usize| {
                    worker.update_job(&jid, |j| j.progress = JobProgress { done, total });
                };
                blocking.commit(&m, &worker.clock, &report).map(|(_, o)| o)
            })
            .await;
            drop(permit);
            let outcome = ran.unwrap_or_else(|join| Err(ApiError::internal(format!("job panicked: {join}"))));
            app.update_job(&job_id, |j| {
                j.finished_at = Some(wall_ms());
                match outcome {
                    Ok(o) => {
                        j.status = JobStatus::Succeeded;
                        if j.progress.total == 0 {
                            j.progress = JobProgress { done: 1, total: 1 };
                        }
                        j.result = serde_json::to_value(o).ok();
                    }
                    Err(e) => {
                        j.status = JobStatus::Failed;
                        j.error = Some(e);
                    }
                }
            });
            let mut running = slot.running.lock().expect("slot lock");
            if running.as_deref() == Some(job_id.as_str()) {
                *running = None;
            }
        });
        Ok(job)
    }
}

fn exists(id: &str) -> ApiError {
    ApiError::new(axum::http::StatusCode::CONFLICT, "workspace_exists", format!("workspace {id:?} already exists"))
}

/// Ordering and freshness checks that need no model call.
fn preflight(ws: &Workspace, m: &Mutation) -> ApiResult<()> {
    use Mutation::*;
    match m {
        GenerateConcepts if ws.context.documents().is_empty() => Err(taforge_core::Error::PreconditionFailed(
            "add at least one context document or research question first".into(),
        )
        .into()),
        RedoClusters { feedback } | RedoThemes { feedback } if feedback.trim().is_empty() => {
            Err(taforge_core::Error::InvalidArgument("feedback must not be empty".into()).into())
        }
        _ => match m.phase() {
            Some(p) if p != Phase::Background && m.regenerates() => Ok(ws.data.require_ready(p)?),
            _ => Ok(()),
        },
    }
}
