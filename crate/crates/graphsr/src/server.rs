//! HTTP front end for [`Session`]s.
//!
//! Each session sits behind its own async mutex, so transitions on one
//! session are serialized while different sessions proceed in parallel.
//! Recovery and eigendecomposition run on the blocking pool.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::session::{self, CreateSession, Session, SessionError, SpectrumCache};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
}

pub struct AppState {
    config: ServerConfig,
    cache: SpectrumCache,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    /// Opens `data_dir`, creating it if needed, and resumes every stored session.
    pub fn open(config: ServerConfig) -> std::io::Result<Arc<Self>> {
        std::fs::create_dir_all(&config.data_dir)?;
        let cache = SpectrumCache::new(config.data_dir.join("cache"));
        let sessions = session::load_all(&config.data_dir, &cache)
            .into_iter()
            .map(|s| (s.id().to_string(), Arc::new(Mutex::new(s))))
            .collect::<HashMap<_, _>>();
        log::info!("resumed {} session(s) from {}", sessions.len(), config.data_dir.display());
        Ok(Arc::new(AppState {
            config,
            cache,
            sessions: RwLock::new(sessions),
        }))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()).into())
    }
}

#[derive(Debug)]
pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl From<graphsr_core::Error> for ApiError {
    fn from(e: graphsr_core::Error) -> Self {
        ApiError(e.into())
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use graphsr_core::Error as E;
        let status = match &self.0 {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::Schema(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::BadRequest(_) => StatusCode::BAD_REQUEST,
            SessionError::Core(e) if e.is_numerical() => StatusCode::INTERNAL_SERVER_ERROR,
            SessionError::Core(E::NotMostRecent { .. } | E::AlreadySelected(_) | E::Exhausted) => StatusCode::CONFLICT,
            SessionError::Core(E::DimensionMismatch { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Core(E::Io { source, .. }) if source.kind() != std::io::ErrorKind::NotFound => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            SessionError::Core(_) => StatusCode::BAD_REQUEST,
        };
        let body = ErrorBody { error: self.0.to_string() };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    #[serde(flatten)]
    pub next: session::NextView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Observation {
    pub vertex: usize,
    pub values: Vec<f64>,
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError(SessionError::BadRequest(format!("worker task failed: {e}")))
}

async fn create(State(app): State<Arc<AppState>>, Json(req): Json<CreateSession>) -> Result<(StatusCode, Json<Created>), ApiError> {
    let id = session::new_id();
    let worker = app.clone();
    let session = tokio::task::spawn_blocking(move || -> Result<Session, ApiError> {
        let s = Session::create(id, req, &worker.config.data_dir, &worker.cache)?;
        s.persist(&worker.config.data_dir)?;
        Ok(s)
    })
    .await
    .map_err(join_error)??;
    let body = Created {
        id: session.id().to_string(),
        next: session.next()?,
    };
    app.sessions
        .write()
        .expect("session map lock")
        .insert(body.id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn list(State(app): State<Arc<AppState>>) -> Json<Vec<String>> {
    let mut ids: Vec<String> = app.sessions.read().expect("session map lock").keys().cloned().collect();
    ids.sort();
    Json(ids)
}

async fn next(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<session::NextView>, ApiError> {
    let s = app.session(&id)?;
    let guard = s.lock().await;
    Ok(Json(guard.next()?))
}

async fn observe(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(obs): Json<Observation>,
) -> Result<Json<session::ObserveOutcome>, ApiError> {
    let s = app.session(&id)?;
    let mut guard = s.lock_owned().await;
    let dir = app.config.data_dir.clone();
    let outcome = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        // Work on a copy so a failed write leaves the in-memory session
        // consistent with the file on disk.
        let mut updated = guard.clone();
        let outcome = updated.observe(obs.vertex, obs.values)?;
        updated.persist(&dir)?;
        *guard = updated;
        Ok(outcome)
    })
    .await
    .map_err(join_error)??;
    Ok(Json(outcome))
}

async fn estimate(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<session::EstimateView>, ApiError> {
    let s = app.session(&id)?;
    let guard = s.lock().await;
    Ok(Json(guard.estimate()))
}

async fn state(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<session::StateView>, ApiError> {
    let s = app.session(&id)?;
    let guard = s.lock().await;
    Ok(Json(guard.state()))
}

pub fn router(app: Arc<AppState>) -> Router {
    let ui_dir = app
        .config
        .ui_dir
        .clone()
        .unwrap_or_else(|| app.config.data_dir.join("ui"));
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/observe", post(observe))
        .route("/sessions/{id}/estimate", get(estimate))
        .route("/sessions/{id}/state", get(state))
        .nest_service("/ui", ServeDir::new(ui_dir).append_index_html_on_directories(true))
        .with_state(app)
}

/// Binds `addr`, announces the bound address on stdout and serves until
/// interrupted.
pub async fn serve(addr: SocketAddr, config: ServerConfig) -> std::io::Result<()> {
    let app = AppState::open(config)?;
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    println!("listening on http://{local}");
    log::info!("serving on {local}");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
