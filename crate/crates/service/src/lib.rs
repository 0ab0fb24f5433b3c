//! Local HTTP/JSON API over one project.
//!
//! Readers work on an immutable snapshot of model and store, swapped
//! atomically after each mutation. Mutations go through a single writer:
//! each one clones the current snapshot, applies the change, saves the
//! store to disk and only then publishes the new snapshot and responds.
//! At most `queue_limit` mutations may be in flight or waiting; further
//! writes get 409.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use hazop_core::consistency::check_consistency;
use hazop_core::diagnostic::{sort_diagnostics, Diagnostic};
use hazop_core::engine::{regenerate, MergeReport};
use hazop_core::ids::{DiagramType, ItemKind, RowAnchor};
use hazop_core::metrics::{compute_stats, guideword_usage, GuideWordUsage, ProjectStats};
use hazop_core::model::validate_model;
use hazop_core::project::{Project, ProjectError};
use hazop_core::report::{render_report, RenderOptions};
use hazop_core::store::{
    item_kind, DeviationRow, ItemUpdate, NewHazard, NewHypothesis, NewRecommendation, RowStatus, RowUpdate,
    StoreError,
};
use hazop_core::{AnalysisStore, GuideWordRegistry, ProjectModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, Semaphore};

pub const DEFAULT_PORT: u16 = 7878;
pub const DEFAULT_QUEUE_LIMIT: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

#[derive(Debug, Clone)]
struct Snapshot {
    model: ProjectModel,
    store: AnalysisStore,
}

/// Shared state behind the router.
pub struct AppState {
    project: Project,
    registry: GuideWordRegistry,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    queue: Semaphore,
}

impl AppState {
    /// Loads model, registry and store. Syntax errors in the model are
    /// fatal here; validation errors are reported through `/diagnostics`.
    pub fn load(project: Project) -> Result<Self, ProjectError> {
        Self::load_with_queue_limit(project, DEFAULT_QUEUE_LIMIT)
    }

    pub fn load_with_queue_limit(project: Project, queue_limit: usize) -> Result<Self, ProjectError> {
        let model = project.load_model()?;
        let registry = project.load_registry()?;
        let store = project.load_store()?;
        Ok(Self {
            project,
            registry,
            snapshot: RwLock::new(Arc::new(Snapshot { model, store })),
            writer: Mutex::new(()),
            queue: Semaphore::new(queue_limit.max(1)),
        })
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Runs one mutation through the writer and persists it before
    /// publishing.
    async fn mutate<T>(&self, f: impl FnOnce(&mut Snapshot) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let _permit = self.queue.try_acquire().map_err(|_| ApiError::busy())?;
        let _writer = self.writer.lock().await;
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        self.project.save_store(&next.store).map_err(ApiError::persist)?;
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        Ok(out)
    }
}

/// Error body: `{"code": ..., "message": ..., "diagnostics": [...]}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
    diagnostics: Vec<Diagnostic>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
    diagnostics: &'a [Diagnostic],
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into(), diagnostics: Vec::new() }
    }

    fn not_found(what: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("{what} does not exist"))
    }

    fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "BUSY", "too many pending changes; retry")
    }

    fn bad_body(e: serde_json::Error) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "INVALID_BODY", e.to_string())
    }

    fn persist(e: ProjectError) -> Self {
        tracing::error!("saving the analysis failed: {e}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "PERSIST_FAILED", e.to_string())
    }

    fn blocked(message: impl Into<String>, diagnostics: Vec<Diagnostic>) -> Self {
        let code = diagnostics.first().map_or("INVALID".to_string(), |d| d.code.clone());
        Self { diagnostics, ..Self::new(StatusCode::BAD_REQUEST, &code, message) }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::UnknownRow(_) | StoreError::UnknownItem(_) => StatusCode::NOT_FOUND,
            StoreError::SeverityNotInScale { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        let diag = Diagnostic::error(e.code(), None, e.to_string());
        Self { diagnostics: vec![diag], ..Self::new(status, e.code(), e.to_string()) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: &self.code, message: &self.message, diagnostics: &self.diagnostics };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

/// Axum's `Json` extractor answers malformed bodies with 422, which is
/// reserved here for severity problems.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(ApiError::bad_body)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/model", get(get_model))
        .route("/registry", get(get_registry))
        .route("/tables", get(list_tables))
        .route("/tables/{id}", get(get_table))
        .route("/tables/{id}/rows/{line}", patch(patch_row))
        .route("/tables/{id}/rows/{line}/duplicate", post(duplicate_row))
        .route("/generate", post(generate))
        .route("/diagnostics", get(diagnostics))
        .route("/stats", get(stats))
        .route("/outputs", get(outputs))
        .route("/report", get(report))
        .route("/hazards", post(add_hazard))
        .route("/recommendations", post(add_recommendation))
        .route("/hypotheses", post(add_hypothesis))
        .route("/hazards/{id}", patch(update_hazard).delete(delete_hazard))
        .route("/recommendations/{id}", patch(update_recommendation).delete(delete_recommendation))
        .route("/hypotheses/{id}", patch(update_hypothesis).delete(delete_hypothesis))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(project: Project, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::load(project)?);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })?;
    tracing::info!("listening on http://{}", listener.local_addr().unwrap_or(addr));
    axum::serve(listener, router(state)).await.map_err(ServiceError::Serve)
}

async fn get_model(State(s): Shared) -> Json<ProjectModel> {
    Json(s.snapshot().model.clone())
}

#[derive(Serialize)]
struct RegistryView<'a> {
    #[serde(flatten)]
    registry: &'a GuideWordRegistry,
    severity_scale: Vec<String>,
}

async fn get_registry(State(s): Shared) -> Response {
    let scale = s.snapshot().store.severity_scale.clone();
    Json(RegistryView { registry: &s.registry, severity_scale: scale }).into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TableSummary {
    pub id: String,
    pub diagram_type: Option<DiagramType>,
    pub rows: usize,
    pub interpreted: usize,
    pub orphaned: usize,
}

async fn list_tables(State(s): Shared) -> Json<Vec<TableSummary>> {
    let snap = s.snapshot();
    let tables = snap
        .store
        .table_ids()
        .into_iter()
        .map(|id| {
            let count = |st: RowStatus| snap.store.rows_of(id).filter(|r| r.status == st).count();
            TableSummary {
                id: id.to_string(),
                diagram_type: DiagramType::of_table(id),
                rows: snap.store.rows_of(id).count(),
                interpreted: count(RowStatus::Interpreted),
                orphaned: count(RowStatus::Orphaned),
            }
        })
        .collect();
    Json(tables)
}

#[derive(Serialize)]
struct TableView<'a> {
    id: &'a str,
    rows: Vec<&'a DeviationRow>,
}

async fn get_table(State(s): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let snap = s.snapshot();
    let rows: Vec<_> = snap.store.rows_of(&id).collect();
    if rows.is_empty() {
        return Err(ApiError::not_found(format!("table {id}")));
    }
    Ok(Json(TableView { id: &id, rows }).into_response())
}

/// An updated row with the consistency findings that concern it.
#[derive(Debug, Serialize, Deserialize)]
pub struct RowResponse {
    pub row: DeviationRow,
    pub diagnostics: Vec<Diagnostic>,
}

fn row_response(snap: &Snapshot, anchor: &RowAnchor) -> RowResponse {
    let row = snap.store.row(&anchor.table, anchor.line).expect("row exists").clone();
    let id = anchor.to_string();
    let diagnostics =
        check_consistency(&snap.model, &snap.store).into_iter().filter(|d| d.element.as_deref() == Some(&id)).collect();
    RowResponse { row, diagnostics }
}

async fn patch_row(State(s): Shared, Path((id, line)): Path<(String, u32)>, bytes: Bytes) -> ApiResult<Json<RowResponse>> {
    let update: RowUpdate = body(&bytes)?;
    let anchor = RowAnchor::new(id, line);
    let out = s
        .mutate(|snap| {
            snap.store.set_row_fields(&anchor.table, anchor.line, update)?;
            Ok(row_response(snap, &anchor))
        })
        .await?;
    tracing::info!("updated row {anchor}");
    Ok(Json(out))
}

async fn duplicate_row(State(s): Shared, Path((id, line)): Path<(String, u32)>) -> ApiResult<(StatusCode, Json<RowResponse>)> {
    let out = s
        .mutate(|snap| {
            let anchor = snap.store.duplicate_row(&id, line)?;
            Ok(row_response(snap, &anchor))
        })
        .await?;
    Ok((StatusCode::CREATED, Json(out)))
}

/// Re-reads the model files, regenerates and merges.
async fn generate(State(s): Shared) -> ApiResult<Json<MergeReport>> {
    let model = s.project.load_model().map_err(|e| match e {
        ProjectError::Parse(errors) => {
            ApiError::blocked("the model has syntax errors", errors.iter().map(|p| p.to_diagnostic()).collect())
        }
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "IO", other.to_string()),
    })?;
    let errors: Vec<_> = validate_model(&model).into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        return Err(ApiError::blocked("the model is invalid", errors));
    }
    let report = s
        .mutate(|snap| {
            let (store, report) = regenerate(&snap.store, &model, &s.registry);
            snap.store = store;
            snap.model = model;
            Ok(report)
        })
        .await?;
    tracing::info!("generated: added {}, orphaned {}", report.added, report.orphaned);
    Ok(Json(report))
}

async fn diagnostics(State(s): Shared) -> Json<Vec<Diagnostic>> {
    let snap = s.snapshot();
    let mut diags = validate_model(&snap.model);
    diags.extend(check_consistency(&snap.model, &snap.store));
    sort_diagnostics(&mut diags);
    Json(diags)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsResponse {
    pub stats: ProjectStats,
    pub guideword_usage: GuideWordUsage,
}

async fn stats(State(s): Shared) -> Json<StatsResponse> {
    let snap = s.snapshot();
    Json(StatsResponse {
        stats: compute_stats(&snap.model, &snap.store),
        guideword_usage: guideword_usage(&snap.store, &s.registry),
    })
}

async fn outputs(State(s): Shared) -> Response {
    Json(s.snapshot().store.concatenate_outputs()).into_response()
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    force: bool,
}

async fn report(State(s): Shared, Query(q): Query<ReportQuery>) -> ApiResult<Response> {
    let snap = s.snapshot();
    let options = RenderOptions {
        force: q.force,
        guideword_usage: Some(guideword_usage(&snap.store, &s.registry)),
        ..Default::default()
    };
    let stats = compute_stats(&snap.model, &snap.store);
    let html = render_report(&snap.model, &snap.store, &stats, &options)
        .map_err(|e| ApiError::blocked(e.to_string(), e.blocking))?;
    Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], html).into_response())
}

/// Response for created registry items.
#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

async fn add_hazard(State(s): Shared, bytes: Bytes) -> ApiResult<(StatusCode, Json<Created>)> {
    let new: NewHazard = body(&bytes)?;
    let id = s.mutate(|snap| Ok(snap.store.add_hazard(new)?)).await?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn add_recommendation(State(s): Shared, bytes: Bytes) -> ApiResult<(StatusCode, Json<Created>)> {
    let new: NewRecommendation = body(&bytes)?;
    let id = s.mutate(|snap| Ok(snap.store.add_recommendation(new)?)).await?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn add_hypothesis(State(s): Shared, bytes: Bytes) -> ApiResult<(StatusCode, Json<Created>)> {
    let new: NewHypothesis = body(&bytes)?;
    let id = s.mutate(|snap| Ok(snap.store.add_hypothesis(new)?)).await?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

/// The item as stored after an update.
fn item_json(store: &AnalysisStore, id: &str) -> serde_json::Value {
    let v = match item_kind(id) {
        Some(ItemKind::Hazard) => store.hazard(id).map(serde_json::to_value),
        Some(ItemKind::Recommendation) => store.recommendation(id).map(serde_json::to_value),
        Some(ItemKind::Hypothesis) => store.hypothesis(id).map(serde_json::to_value),
        None => None,
    };
    v.and_then(Result::ok).unwrap_or_default()
}

async fn update_item(s: &AppState, kind: ItemKind, id: String, bytes: Bytes) -> ApiResult<Json<serde_json::Value>> {
    if item_kind(&id) != Some(kind) {
        return Err(ApiError::not_found(id));
    }
    let update: ItemUpdate = body(&bytes)?;
    let out = s
        .mutate(|snap| {
            snap.store.update_item(&id, update)?;
            Ok(item_json(&snap.store, &id))
        })
        .await?;
    Ok(Json(out))
}

async fn delete_item(s: &AppState, kind: ItemKind, id: String) -> ApiResult<StatusCode> {
    if item_kind(&id) != Some(kind) {
        return Err(ApiError::not_found(id));
    }
    s.mutate(|snap| Ok(snap.store.delete_item(&id)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn update_hazard(State(s): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<serde_json::Value>> {
    update_item(&s, ItemKind::Hazard, id, bytes).await
}

async fn update_recommendation(State(s): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<serde_json::Value>> {
    update_item(&s, ItemKind::Recommendation, id, bytes).await
}

async fn update_hypothesis(State(s): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Json<serde_json::Value>> {
    update_item(&s, ItemKind::Hypothesis, id, bytes).await
}

async fn delete_hazard(State(s): Shared, Path(id): Path<String>) -> ApiResult<StatusCode> {
    delete_item(&s, ItemKind::Hazard, id).await
}

async fn delete_recommendation(State(s): Shared, Path(id): Path<String>) -> ApiResult<StatusCode> {
    delete_item(&s, ItemKind::Recommendation, id).await
}

async fn delete_hypothesis(State(s): Shared, Path(id): Path<String>) -> ApiResult<StatusCode> {
    delete_item(&s, ItemKind::Hypothesis, id).await
}
