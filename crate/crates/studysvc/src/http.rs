//! JSON-over-HTTP API:
//!
//! | method | path | body | reply |
//! |--------|------|------|-------|
//! | GET | `/health` | | `{"status":"ok"}` |
//! | POST | `/api/sessions` | [`CreateSessionRequest`] | [`SessionCreated`] |
//! | GET | `/api/sessions/{id}/next` | | [`NextTrial`](crate::NextTrial) |
//! | POST | `/api/sessions/{id}/responses` | [`SubmitRequest`] | [`SubmitAck`](crate::SubmitAck) |
//! | GET | `/api/experiments/{id}/aggregate` | | [`ExperimentSummary`](crate::ExperimentSummary) |
//! | GET | `/media/{token}` | | stimulus file |
//!
//! Errors reply `{"error": code, "message": text}` with status 400, 404,
//! 409 or 422.

use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use fvlab_core::datamodel::{Demographics, Manifest};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::config::ServiceConfig;
use crate::error::StudyError;
use crate::experiment::ExperimentId;
use crate::session::Choice;
use crate::stimuli::StimulusPool;
use crate::store::{SessionCreated, StudyStore};

#[derive(Clone)]
struct AppState {
    store: Arc<Mutex<StudyStore>>,
    media_root: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub experiment: ExperimentId,
    pub demographics: Demographics,
    #[serde(default)]
    pub contributed_stimuli: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitRequest {
    pub trial_index: usize,
    pub choice: Choice,
    pub response_ms: u64,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
}

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        let status = match &self {
            StudyError::BadRequest(_) => StatusCode::BAD_REQUEST,
            StudyError::NotFound(_) => StatusCode::NOT_FOUND,
            StudyError::OutOfOrder { .. }
            | StudyError::ConflictingDuplicate(_)
            | StudyError::Completed(_) => StatusCode::CONFLICT,
            StudyError::PoolExhausted(_) | StudyError::NoCompletedSessions(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => {
                log::error!("{self}");
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        (
            status,
            Json(ErrorBody {
                error: self.code(),
                message: self.to_string(),
            }),
        )
            .into_response()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Runs a store operation off the async executor, since appends fsync.
async fn with_store<T: Send + 'static>(
    state: &AppState,
    f: impl FnOnce(&mut StudyStore) -> Result<T, StudyError> + Send + 'static,
) -> Result<T, StudyError> {
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || f(&mut store.lock().unwrap_or_else(|e| e.into_inner())))
        .await
        .map_err(|e| StudyError::Io(std::io::Error::other(e)))?
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_session(
    State(state): State<AppState>,
    Json(req): Json<CreateSessionRequest>,
) -> Result<(StatusCode, Json<SessionCreated>), StudyError> {
    let created = with_store(&state, move |s| {
        s.create_session(
            req.experiment,
            req.demographics,
            req.contributed_stimuli,
            now_ms(),
        )
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn next_trial(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    match with_store(&state, move |s| s.next_trial(&id)).await {
        Ok(next) => Json(next).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn submit_response(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<SubmitRequest>,
) -> Response {
    let result = with_store(&state, move |s| {
        s.submit_response(&id, req.trial_index, req.choice, req.response_ms, now_ms())
    })
    .await;
    match result {
        Ok(ack) => Json(ack).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn aggregate(State(state): State<AppState>, UrlPath(exp): UrlPath<String>) -> Response {
    let exp: ExperimentId = match exp.parse() {
        Ok(e) => e,
        Err(e) => return StudyError::into_response(e),
    };
    match with_store(&state, move |s| s.aggregate(exp)).await {
        Ok(summary) => Json(summary).into_response(),
        Err(e) => e.into_response(),
    }
}

fn content_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("webp") => "image/webp",
        Some("wav") => "audio/wav",
        Some("mp3") => "audio/mpeg",
        Some("m4a") => "audio/mp4",
        Some("ogg") => "audio/ogg",
        Some("webm") => "audio/webm",
        _ => "application/octet-stream",
    }
}

async fn media(State(state): State<AppState>, UrlPath(token): UrlPath<String>) -> Response {
    let asset = {
        let store = state.store.lock().unwrap_or_else(|e| e.into_inner());
        store.media_asset(&token).map(str::to_string)
    };
    let Some(asset) = asset else {
        return StudyError::NotFound(format!("media {token}")).into_response();
    };
    let rel = Path::new(&asset);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StudyError::BadRequest("asset reference escapes the media root".into())
            .into_response();
    }
    let path = state.media_root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StudyError::NotFound(format!("media {token}")).into_response(),
    }
}

/// The API router over an open store. `ui_dir`, when given, is mounted as
/// static files at `/`.
pub fn router(store: StudyStore, media_root: PathBuf, ui_dir: Option<PathBuf>) -> Router {
    let state = AppState {
        store: Arc::new(Mutex::new(store)),
        media_root,
    };
    let api = Router::new()
        .route("/health", get(health))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(next_trial))
        .route("/api/sessions/{id}/responses", post(submit_response))
        .route("/api/experiments/{id}/aggregate", get(aggregate))
        .route("/media/{token}", get(media))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Loads the stimulus manifest (asset refs only; feature files are not
/// read) and opens the store.
pub fn open_store(config: &ServiceConfig) -> Result<StudyStore, StudyError> {
    let manifest = Manifest::load(&config.manifest)?;
    let stimuli = StimulusPool::from_manifest(&manifest)?;
    log::info!(
        "{} stimulus identities from {}",
        stimuli.len(),
        config.manifest.display()
    );
    StudyStore::open(stimuli, &config.data_dir, config.seed)
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), StudyError> {
    let store = open_store(&config)?;
    let app = router(store, config.media_root(), config.ui_dir.clone());
    let listener = tokio::net::TcpListener::bind((config.bind.as_str(), config.port)).await?;
    log::info!(
        "study service listening on http://{}",
        listener.local_addr()?
    );
    axum::serve(listener, app).await?;
    Ok(())
}
