use std::collections::BTreeSet;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use taforge_core::context::DocumentKind;
use taforge_core::ingest::CorpusFilter;
use taforge_core::llm::ProviderConfig;
use taforge_core::metrics::{evaluate_json, EvalKind, PrfMode, DEFAULT_TAU};
use taforge_core::pipeline::{
    score_phase, CreateSpec, Mutation, Organization, Phase,
    ScoreReference, Source,
};
use taforge_core::report::{build_report, to_csv_bytes};
use ulid::Ulid;

use crate::edits::{self, EditTarget};
use crate::error::{ApiError, ApiResult};
use crate::state::{SharedApp, SlotView};
use crate::views;

/// `Json` with rejections rendered as the error envelope.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(rejection(e)),
        }
    }
}

fn rejection(e: JsonRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

/// A body that may be absent altogether.
fn optional<T: DeserializeOwned + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::internal(format!("worker failed: {e}"))))
}

pub fn router(app: SharedApp) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/openapi.json", get(|| async { Json(crate::openapi::document()) }))
        .route("/workspaces", get(list_workspaces).post(create_workspace))
        .route("/workspaces/{id}", get(get_workspace).delete(delete_workspace))
        .route("/workspaces/{id}/transcripts", get(list_transcripts))
        .route("/workspaces/{id}/transcripts/{post_id}", get(get_transcript))
        .route("/workspaces/{id}/context", get(get_context).post(add_context))
        .route("/workspaces/{id}/phases/{spec}", get(get_phase).post(phase_action))
        .route("/workspaces/{id}/jobs", get(list_jobs))
        .route("/workspaces/{id}/concepts", axum::routing::patch(patch_concepts))
        .route("/workspaces/{id}/outline", axum::routing::patch(patch_outline))
        .route("/workspaces/{id}/codebook", axum::routing::patch(patch_codebook))
        .route("/workspaces/{id}/applications", axum::routing::patch(patch_applications))
        .route("/workspaces/{id}/clusters", axum::routing::patch(patch_clusters))
        .route("/workspaces/{id}/themes", axum::routing::patch(patch_themes))
        .route("/workspaces/{id}/report", get(get_report))
        .route("/workspaces/{id}/snapshots", get(list_snapshots).post(take_snapshot))
        .route("/workspaces/{id}/snapshots/{spec}", post(restore_snapshot))
        .route("/workspaces/{id}/eval", post(eval_workspace))
        .route("/workspaces/{id}/audit", get(get_audit))
        .route("/jobs/{job_id}", get(get_job))
        .route("/eval", post(eval_stateless))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(app.clone(), authorize))
        .with_state(app.clone());

    let root = Router::new().nest("/v1", api);
    match &app.config.ui_dir {
        Some(dir) => root.fallback_service(tower_http::services::ServeDir::new(dir).append_index_html_on_directories(true)),
        None => root
            .route("/", get(|| async { Json(json!({ "service": "taforge", "api": "/v1", "openapi": "/v1/openapi.json" })) }))
            .fallback(not_found),
    }
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "route_not_found", "no such route")
}

async fn authorize(State(app): State<SharedApp>, req: Request, next: Next) -> Response {
    let Some(token) = app.config.token.as_deref() else {
        return next.run(req).await;
    };
    if req.uri().path() == "/health" || req.uri().path() == "/v1/health" {
        return next.run(req).await;
    }
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|h| h.to_str().ok())
        .and_then(|h| h.strip_prefix("Bearer "));
    if presented == Some(token) {
        next.run(req).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response()
    }
}

async fn list_workspaces(State(app): State<SharedApp>) -> Json<Value> {
    let items: Vec<Value> = app.slots().iter().map(|s| views::listing(s)).collect();
    Json(json!({ "workspaces": items }))
}

#[derive(Deserialize)]
struct CreateBody {
    #[serde(default)]
    workspace_id: Option<String>,
    #[serde(default)]
    name: Option<String>,
    source: Source,
    #[serde(default)]
    filter: CorpusFilter,
    #[serde(default)]
    config: Option<ProviderConfig>,
}

async fn create_workspace(State(app): State<SharedApp>, Body(body): Body<CreateBody>) -> ApiResult<impl IntoResponse> {
    let workspace_id = body
        .workspace_id
        .unwrap_or_else(|| format!("ws-{}", Ulid::new().to_string().to_lowercase()));
    let spec = CreateSpec {
        name: body.name.unwrap_or_else(|| workspace_id.clone()),
        workspace_id,
        source: body.source,
        filter: body.filter,
        config: body.config,
    };
    let id = spec.workspace_id.clone();
    let a = app.clone();
    blocking(move || a.create(spec).map(|_| ())).await?;
    let slot = app.slot(&id)?;
    Ok((StatusCode::CREATED, Json(views::workspace(&slot))))
}

async fn get_workspace(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    Ok(Json(views::workspace(&slot)))
}

async fn delete_workspace(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    blocking(move || app.delete(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
struct Page {
    #[serde(default)]
    offset: usize,
    #[serde(default)]
    limit: Option<usize>,
}

async fn list_transcripts(State(app): State<SharedApp>, Path(id): Path<String>, Query(page): Query<Page>) -> ApiResult<Json<Value>> {
    let ws = app.slot(&id)?.ready()?;
    let sample: BTreeSet<&str> = ws.data.load.sample_ids.iter().map(String::as_str).collect();
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for a in &ws.data.coding.applications {
        *counts.entry(a.post_id.as_str()).or_default() += 1;
    }
    let items: Vec<Value> = ws
        .corpus
        .transcripts()
        .iter()
        .skip(page.offset)
        .take(page.limit.unwrap_or(usize::MAX))
        .map(|t| {
            json!({
                "post_id": t.post_id,
                "title": t.title,
                "created_utc": t.created_utc,
                "comments": t.comments().len(),
                "in_sample": sample.contains(t.post_id.as_str()),
                "applications": counts.get(t.post_id.as_str()).copied().unwrap_or(0),
            })
        })
        .collect();
    Ok(Json(json!({ "total": ws.corpus.len(), "offset": page.offset, "transcripts": items })))
}

async fn get_transcript(State(app): State<SharedApp>, Path((id, post_id)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let ws = app.slot(&id)?.ready()?;
    let t = ws
        .corpus
        .get(&post_id)
        .ok_or_else(|| ApiError::from(taforge_core::Error::NotFound(format!("transcript {post_id}"))))?;
    let apps: Vec<_> = ws.data.coding.applications.iter().filter(|a| a.post_id == post_id).collect();
    Ok(Json(json!({ "transcript": t, "full_text": t.full_text(), "applications": apps })))
}

async fn get_context(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ws = app.slot(&id)?.ready()?;
    Ok(Json(json!({ "documents": ws.context.documents() })))
}

#[derive(Deserialize)]
struct ContextBody {
    #[serde(default = "default_kind")]
    kind: DocumentKind,
    text: String,
}

fn default_kind() -> DocumentKind {
    DocumentKind::UploadedDocument
}

async fn add_context(State(app): State<SharedApp>, Path(id): Path<String>, Body(body): Body<ContextBody>) -> ApiResult<impl IntoResponse> {
    let m = Mutation::AddContext { kind: body.kind, text: body.text };
    let v = edit(app, id, m).await?;
    Ok((StatusCode::CREATED, Json(v)))
}

fn parse_phase(s: &str) -> ApiResult<Phase> {
    s.parse::<u8>()
        .ok()
        .and_then(|n| Phase::from_number(n).ok())
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "route_not_found", format!("no phase {s:?}; phases are 1 to 6")))
}

async fn get_phase(State(app): State<SharedApp>, Path((id, spec)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let p = parse_phase(&spec)?;
    let slot = app.slot(&id)?;
    match slot.view() {
        SlotView::Ready(ws) => Ok(Json(views::phase(&ws, p))),
        // Degraded workspaces still serve whatever parses on disk.
        SlotView::Degraded { reason, .. } => {
            let path = slot.dir.path.join("phases").join(format!("phase{}.json", p.number()));
            let raw = std::fs::read(&path)
                .ok()
                .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
                .ok_or_else(|| ApiError::from(taforge_core::Error::Corrupt(format!("phase {p} unreadable: {reason}"))))?;
            Ok(Json(json!({ "phase": p, "degraded": true, "state": raw["state"], "payload": raw["payload"] })))
        }
    }
}

#[derive(Default, Deserialize)]
struct RunBody {
    #[serde(default)]
    step: Option<String>,
    #[serde(default)]
    sample_size: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    filter: Option<CorpusFilter>,
    #[serde(default)]
    organization: Option<Organization>,
    #[serde(default)]
    feedback: Option<String>,
}

async fn phase_action(
    State(app): State<SharedApp>,
    Path((id, spec)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult<impl IntoResponse> {
    let (num, action) = spec
        .split_once(':')
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "route_not_found", "use phases/{n}:run or phases/{n}:redo"))?;
    let p = parse_phase(num)?;
    let body: RunBody = optional(&bytes)?;
    let m = match action {
        "run" => match Mutation::run(p, body.step.as_deref())? {
            Mutation::LoadData { .. } => Mutation::LoadData {
                sample_size: body.sample_size,
                seed: body.seed,
                filter: body.filter,
            },
            Mutation::BuildReport { .. } => Mutation::BuildReport {
                organization: body.organization.unwrap_or_default(),
            },
            other => other,
        },
        "redo" => Mutation::redo(p, body.feedback.unwrap_or_default())?,
        _ => return Err(ApiError::new(StatusCode::NOT_FOUND, "route_not_found", format!("unknown phase action {action:?}"))),
    };
    let job = app.start_job(&id, m)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job.job_id, "job": job }))))
}

async fn get_job(State(app): State<SharedApp>, Path(job_id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(serde_json::to_value(app.job(&job_id)?).unwrap_or_default()))
}

async fn list_jobs(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    app.slot(&id)?;
    Ok(Json(json!({ "jobs": app.jobs_of(&id) })))
}

/// Runs a synchronous mutation and renders the touched phase.
async fn edit(app: SharedApp, id: String, m: Mutation) -> ApiResult<Value> {
    blocking(move || {
        let p = m.phase();
        let (ws, out) = app.mutate(&id, &m)?;
        Ok(views::edit(&ws, p, &out))
    })
    .await
}

async fn patch(app: SharedApp, id: String, target: EditTarget, body: Value) -> ApiResult<Json<Value>> {
    let m = edits::mutation(target, body).map_err(|e| match e {
        taforge_core::Error::Json(e) => ApiError::bad_request(format!("invalid edit body: {e}")),
        other => other.into(),
    })?;
    Ok(Json(edit(app, id, m).await?))
}

async fn patch_concepts(State(app): State<SharedApp>, Path(id): Path<String>, Body(b): Body<Value>) -> ApiResult<Json<Value>> {
    patch(app, id, EditTarget::Concepts, b).await
}

async fn patch_outline(State(app): State<SharedApp>, Path(id): Path<String>, Body(b): Body<Value>) -> ApiResult<Json<Value>> {
    patch(app, id, EditTarget::Outline, b).await
}

async fn patch_codebook(State(app): State<SharedApp>, Path(id): Path<String>, Body(b): Body<Value>) -> ApiResult<Json<Value>> {
    patch(app, id, EditTarget::Codebook, b).await
}

async fn patch_applications(State(app): State<SharedApp>, Path(id): Path<String>, Body(b): Body<Value>) -> ApiResult<Json<Value>> {
    patch(app, id, EditTarget::Applications, b).await
}

async fn patch_clusters(State(app): State<SharedApp>, Path(id): Path<String>, Body(b): Body<Value>) -> ApiResult<Json<Value>> {
    patch(app, id, EditTarget::Clusters, b).await
}

async fn patch_themes(State(app): State<SharedApp>, Path(id): Path<String>, Body(b): Body<Value>) -> ApiResult<Json<Value>> {
    patch(app, id, EditTarget::Themes, b).await
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    organization: Option<String>,
}

async fn get_report(State(app): State<SharedApp>, Path(id): Path<String>, Query(q): Query<ReportQuery>) -> ApiResult<Response> {
    let org: Organization = match q.organization.as_deref() {
        Some(s) => s.parse()?,
        None => Organization::default(),
    };
    let ws = app.slot(&id)?.ready()?;
    let bytes = blocking(move || Ok(to_csv_bytes(&build_report(&ws, org)?)?)).await?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, "text/csv; charset=utf-8".parse().expect("static header"));
    headers.insert(
        header::CONTENT_DISPOSITION,
        format!("attachment; filename=\"{id}-report.csv\"").parse().map_err(|_| ApiError::internal("bad header"))?,
    );
    Ok((headers, bytes).into_response())
}

async fn list_snapshots(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ws = app.slot(&id)?.ready()?;
    Ok(Json(json!({ "snapshots": ws.snapshots })))
}

#[derive(Default, Deserialize)]
struct SnapshotBody {
    #[serde(default)]
    reason: Option<String>,
}

async fn take_snapshot(State(app): State<SharedApp>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<impl IntoResponse> {
    let body: SnapshotBody = optional(&bytes)?;
    let v = edit(app, id, Mutation::Snapshot { reason: body.reason }).await?;
    Ok((StatusCode::CREATED, Json(json!({ "snapshot": v["snapshot"] }))))
}

async fn restore_snapshot(State(app): State<SharedApp>, Path((id, spec)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let snapshot_id = spec
        .strip_suffix(":restore")
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "route_not_found", "use snapshots/{id}:restore"))?
        .to_string();
    let (ws, out) = blocking(move || app.mutate(&id, &Mutation::Restore { snapshot_id })).await?;
    Ok(Json(json!({
        "phases": views::phase_rows(&ws),
        "stale_phases": ws.data.stale_phases(),
        "warnings": out.warnings,
    })))
}

#[derive(Deserialize)]
struct EvalBody {
    phase: u8,
    #[serde(default = "current")]
    reference: ScoreReference,
    #[serde(default = "default_tau")]
    tau: f64,
    #[serde(default)]
    mode: PrfMode,
}

fn current() -> ScoreReference {
    ScoreReference::Current
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

async fn eval_workspace(State(app): State<SharedApp>, Path(id): Path<String>, Body(b): Body<EvalBody>) -> ApiResult<Json<Value>> {
    let p = Phase::from_number(b.phase)?;
    let slot = app.slot(&id)?;
    let ws = slot.ready()?;
    let report = blocking(move || {
        let emb = slot.gateway()?.embedder();
        Ok(score_phase(&ws, p, &b.reference, b.tau, b.mode, emb)?)
    })
    .await?;
    Ok(Json(serde_json::to_value(report).unwrap_or_default()))
}

#[derive(Deserialize)]
struct StatelessEval {
    kind: EvalKind,
    predicted: Value,
    reference: Value,
    #[serde(default = "default_tau")]
    tau: f64,
    #[serde(default)]
    mode: PrfMode,
}

async fn eval_stateless(State(app): State<SharedApp>, Body(b): Body<StatelessEval>) -> ApiResult<Json<Value>> {
    let report = blocking(move || {
        let gw = app.default_gateway()?;
        Ok(evaluate_json(b.kind, &b.predicted, &b.reference, b.tau, b.mode, gw.embedder())?)
    })
    .await?;
    Ok(Json(serde_json::to_value(report).unwrap_or_default()))
}

async fn get_audit(State(app): State<SharedApp>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let slot = app.slot(&id)?;
    let entries = blocking(move || Ok(slot.dir.audit()?)).await?;
    Ok(Json(json!({ "entries": entries })))
}

