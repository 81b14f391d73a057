//! HTTP routes over the queue and the experiment status board.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tablesp_core::supervision::{Annotation, Content, Query};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::queue::{PendingQuery, Queue, QueueError, QueryRecord, QueryStatus};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    #[default]
    Idle,
    Training,
    AwaitingAnnotations,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub iteration: usize,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

/// Body of `PUT /api/experiment/status`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatusUpdate {
    pub state: RunState,
    pub iteration: usize,
    pub label: String,
    pub accuracies: Vec<AccuracyPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub state: RunState,
    pub iteration: usize,
    pub label: String,
    pub pending_count: usize,
    pub accuracies: Vec<AccuracyPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enqueued {
    pub query_id: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub query_id: u64,
    pub status: QueryStatus,
    /// `full_mr` or `sketch`, as parsed.
    pub stored_as: String,
    /// Canonical text of what was stored.
    pub canonical: String,
}

#[derive(Clone, Default)]
pub struct AppState {
    pub queue: Arc<Mutex<Queue>>,
    pub status: Arc<Mutex<StatusUpdate>>,
}

impl AppState {
    pub fn new(queue: Queue) -> Self {
        AppState { queue: Arc::new(Mutex::new(queue)), status: Arc::default() }
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    /// Static annotator UI served at `/`.
    pub ui_dir: Option<PathBuf>,
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<QueueError> for ApiError {
    fn from(e: QueueError) -> Self {
        let code = match e {
            QueueError::NotFound(_) => StatusCode::NOT_FOUND,
            QueueError::AlreadyResolved(_) => StatusCode::CONFLICT,
            QueueError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            QueueError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.body_text())
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn pending(State(s): State<AppState>) -> Json<Vec<PendingQuery>> {
    Json(lock(&s.queue).pending())
}

async fn query(State(s): State<AppState>, Path(id): Path<u64>) -> Result<Json<QueryRecord>, ApiError> {
    lock(&s.queue).get(id).cloned().map(Json).ok_or_else(|| QueueError::NotFound(id).into())
}

async fn enqueue(State(s): State<AppState>, body: Result<Json<Query>, JsonRejection>) -> Result<(StatusCode, Json<Enqueued>), ApiError> {
    let Json(q) = body?;
    let query_id = lock(&s.queue).enqueue(q)?;
    Ok((StatusCode::CREATED, Json(Enqueued { query_id })))
}

async fn annotate(
    State(s): State<AppState>,
    Path(id): Path<u64>,
    body: Result<Json<Annotation>, JsonRejection>,
) -> Result<Json<Resolution>, ApiError> {
    let mut queue = lock(&s.queue);
    if queue.get(id).is_none() {
        return Err(QueueError::NotFound(id).into());
    }
    let Json(ann) = body?;
    let content = queue.resolve(id, ann)?;
    let (stored_as, canonical) = match content {
        Content::FullMr(p) => ("full_mr", p.to_string()),
        Content::Sketch(sk) => ("sketch", sk.to_string()),
    };
    Ok(Json(Resolution { query_id: id, status: QueryStatus::Resolved, stored_as: stored_as.into(), canonical }))
}

async fn status(State(s): State<AppState>) -> Json<ExperimentStatus> {
    let pending_count = lock(&s.queue).pending_count();
    let st = lock(&s.status).clone();
    Json(ExperimentStatus { state: st.state, iteration: st.iteration, label: st.label, pending_count, accuracies: st.accuracies })
}

async fn set_status(
    State(s): State<AppState>,
    body: Result<Json<StatusUpdate>, JsonRejection>,
) -> Result<Json<ExperimentStatus>, ApiError> {
    let Json(up) = body?;
    *lock(&s.status) = up;
    Ok(status(State(s)).await)
}

pub fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/queries", post(enqueue))
        .route("/api/queries/pending", get(pending))
        .route("/api/queries/{id}", get(query))
        .route("/api/queries/{id}/annotation", post(annotate))
        .route("/api/experiment/status", get(status).put(set_status))
        .with_state(state);
    let app = match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}
