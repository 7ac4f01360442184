//! HTTP backend for labeling sampled linkage candidates.
//!
//! | route                   | purpose                                       |
//! |-------------------------|-----------------------------------------------|
//! | `GET /api/tasks/next`   | lease the next unlabeled task to an evaluator |
//! | `POST /api/labels`      | record a yes/no/unknown judgment              |
//! | `GET /api/stats`        | progress and precision/recall at threshold    |
//!
//! Labels are appended to a JSON Lines file before they are acknowledged;
//! the in-memory view is rebuilt from that file at startup.

mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};

use majinlink_core::evaluation::{CandidateKey, Label};

pub use state::{
    BinProgress, Clock, CurveSummary, LabelingTask, NextTask, ServiceState, Stats, SubmitError,
};

pub const DEFAULT_LEASE: Duration = Duration::from_secs(600);
pub const DEFAULT_THRESHOLD: f64 = 80.0;
pub const EXCERPT_PARAGRAPHS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Evaluation(#[from] majinlink_core::evaluation::EvaluationError),
    #[error(transparent)]
    Jsonl(#[from] majinlink_core::jsonl::JsonlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Append-only label store.
    pub labels_path: PathBuf,
    /// Directory of `<item_id>.txt` extracted texts for excerpts.
    pub texts_dir: Option<PathBuf>,
    pub lease: Duration,
    pub threshold: f64,
    /// Bootstrap resamples and seed for the live curve.
    pub resamples: usize,
    pub seed: u64,
}

impl ServiceConfig {
    pub fn new(labels_path: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            labels_path: labels_path.into(),
            texts_dir: None,
            lease: DEFAULT_LEASE,
            threshold: DEFAULT_THRESHOLD,
            resamples: majinlink_core::evaluation::DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

type Shared = Arc<ServiceState>;

#[derive(Debug, Deserialize)]
struct NextQuery {
    evaluator_id: Option<String>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn next_task(State(state): State<Shared>, Query(q): Query<NextQuery>) -> Response {
    let evaluator = q.evaluator_id.unwrap_or_else(|| "anonymous".to_string());
    match state.next_task(&evaluator) {
        NextTask::NoPlan => error(StatusCode::CONFLICT, "no sampling plan loaded"),
        NextTask::Done => StatusCode::NO_CONTENT.into_response(),
        NextTask::AllLeased { retry_after } => {
            let secs = retry_after.as_secs().max(1).to_string();
            let mut resp = error(StatusCode::SERVICE_UNAVAILABLE, "all remaining tasks are leased");
            if let Ok(v) = HeaderValue::from_str(&secs) {
                resp.headers_mut().insert(header::RETRY_AFTER, v);
            }
            resp
        }
        NextTask::Task(task) => Json(task).into_response(),
    }
}

/// Validates a label submission by hand so each failure gets its own status:
/// malformed body 400, unknown label 422, unknown candidate 404.
fn parse_submission(body: &[u8]) -> Result<(CandidateKey, Label, String), (StatusCode, String)> {
    let bad = |m: &str| (StatusCode::BAD_REQUEST, m.to_string());
    let v: Value = serde_json::from_slice(body).map_err(|e| bad(&format!("invalid JSON: {e}")))?;
    let candidate = v.get("candidate").ok_or_else(|| bad("missing candidate"))?;
    let field = |name: &str| {
        candidate
            .get(name)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("candidate.{name} must be a string")))
    };
    let key = CandidateKey::new(field("cluster_id")?, field("work_id")?);
    let evaluator = v
        .get("evaluator_id")
        .and_then(Value::as_str)
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| bad("evaluator_id must be a non-empty string"))?
        .to_string();
    let raw = v.get("label").ok_or_else(|| bad("missing label"))?;
    let label = raw
        .as_str()
        .and_then(|s| s.parse::<Label>().ok())
        .ok_or_else(|| {
            (
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("label must be one of yes, no, unknown; got {raw}"),
            )
        })?;
    Ok((key, label, evaluator))
}

async fn post_label(State(state): State<Shared>, body: Bytes) -> Response {
    let (key, label, evaluator) = match parse_submission(&body) {
        Ok(parts) => parts,
        Err((status, message)) => return error(status, message),
    };
    match state.submit(key, label, evaluator) {
        Ok(stored) => (StatusCode::CREATED, Json(json!({ "stored_labels": stored }))).into_response(),
        Err(SubmitError::NoPlan) => error(StatusCode::CONFLICT, "no sampling plan loaded"),
        Err(SubmitError::UnknownCandidate(k)) => error(StatusCode::NOT_FOUND, format!("candidate {k} is not in the plan")),
        Err(SubmitError::Store(e)) => {
            log::error!("label store write failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, "label store write failed")
        }
    }
}

async fn stats(State(state): State<Shared>) -> Json<Stats> {
    Json(state.stats())
}

pub fn router(state: Arc<ServiceState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/labels", post(post_label))
        .route("/api/stats", get(stats))
        .layer(cors)
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<ServiceState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("eval service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
