//! HTTP session service.
//!
//! `POST /sessions` builds the offline model and a live session,
//! `GET /sessions/{id}` returns the latest frame state, `POST
//! /sessions/{id}/steer` applies a pan/tilt increment, and
//! `GET /sessions/{id}/stream` pushes every frame state as a server-sent
//! event in frame order. Auto-mode sessions steer themselves in a background
//! task. Sessions live in memory until the server stops.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use camguide_core::live::LiveSession;
use camguide_core::planner::PlannerError;
use camguide_core::simulator::{generate_scene, NoiseModel, OfflineModel, PipelineConfig, Scene, SimError};
use camguide_core::ViewId;
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::formats::{status_str, FrameStateJson, SceneConfigJson, SceneFile};

/// Frames an auto-mode session may render before its task stops.
pub const AUTO_FRAME_LIMIT: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Auto,
    #[default]
    Manual,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    /// Inline generator settings; the noise model is the default one seeded
    /// with the scene seed.
    #[serde(default)]
    pub scene: Option<SceneConfigJson>,
    /// Stem of a scene file in the server's scene directory.
    #[serde(default)]
    pub scene_id: Option<String>,
    pub initial: u32,
    pub destination: u32,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    pub mode: Mode,
    /// Seconds since the Unix epoch.
    pub created_at: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerRequest {
    pub pan: f64,
    pub tilt: f64,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, r.body_text())
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        let status = match e {
            SimError::UnknownView(_) | SimError::SameView => StatusCode::BAD_REQUEST,
            SimError::Planner(PlannerError::SessionTerminal) => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
}

struct Entry {
    id: String,
    mode: Mode,
    live: Mutex<LiveSession>,
    tx: broadcast::Sender<FrameStateJson>,
}

impl Entry {
    /// Runs `f` on the session and publishes the resulting state. Sending
    /// under the lock keeps the stream in frame order.
    fn update(&self, f: impl FnOnce(&mut LiveSession) -> Result<(), SimError>) -> Result<FrameStateJson, SimError> {
        let mut live = self.live.lock().expect("session lock");
        let before = live.status();
        f(&mut live)?;
        let state = FrameStateJson::from(live.state());
        if live.status() != before {
            tracing::info!(session = %self.id, from = status_str(before), to = status_str(live.status()), "status");
        }
        let _ = self.tx.send(state.clone());
        Ok(state)
    }
}

#[derive(Default)]
pub struct ServiceState {
    scenes_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
}

impl ServiceState {
    pub fn new(scenes_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(Self { scenes_dir, ..Self::default() })
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .expect("session table")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }

    fn load_scene(&self, req: &CreateRequest) -> Result<(Scene, NoiseModel), ApiError> {
        match (&req.scene, &req.scene_id) {
            (Some(cfg), None) => {
                let cfg = cfg.to_config().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
                let scene =
                    generate_scene(&cfg).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
                Ok((scene, NoiseModel::default().with_seed(cfg.seed)))
            }
            (None, Some(id)) => {
                let valid = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
                let dir = self.scenes_dir.as_ref().filter(|_| valid);
                let path = dir.map(|d| d.join(format!("{id}.json")));
                let text = path
                    .and_then(|p| std::fs::read_to_string(p).ok())
                    .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown scene {id:?}")))?;
                let file: SceneFile = serde_json::from_str(&text).map_err(internal)?;
                file.to_scene().map_err(internal)
            }
            _ => Err(ApiError::new(StatusCode::BAD_REQUEST, "give exactly one of scene and scene_id")),
        }
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_state))
        .route("/sessions/{id}/steer", post(steer))
        .route("/sessions/{id}/stream", get(stream_states))
        .with_state(state)
}

async fn create_session(
    State(app): State<Arc<ServiceState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<Json<SessionHandle>, ApiError> {
    let Json(req) = body?;
    let mode = req.mode;
    let setup = app.clone();
    let live = tokio::task::spawn_blocking(move || -> Result<LiveSession, ApiError> {
        let (scene, noise) = setup.load_scene(&req)?;
        let cfg = PipelineConfig::default();
        let (initial, destination) = (ViewId(req.initial), ViewId(req.destination));
        for v in [initial, destination] {
            scene.camera(v).ok_or(SimError::UnknownView(v))?;
        }
        if initial == destination {
            return Err(SimError::SameView.into());
        }
        let model = OfflineModel::build(&scene, &noise, &cfg)?;
        Ok(LiveSession::new(Arc::new(scene), Arc::new(model), initial, destination, noise, cfg, req.seed)?)
    })
    .await
    .map_err(internal)??;

    let id = format!("s{}", app.next_id.fetch_add(1, Ordering::Relaxed) + 1);
    let status = live.status();
    let (tx, _) = broadcast::channel(64);
    let entry = Arc::new(Entry { id: id.clone(), mode, live: Mutex::new(live), tx });
    app.sessions.write().expect("session table").insert(id.clone(), entry.clone());
    tracing::info!(session = %id, ?mode, status = status_str(status), "created");
    if mode == Mode::Auto {
        tokio::spawn(autopilot(entry));
    }
    Ok(Json(SessionHandle { id, mode, created_at: now() }))
}

async fn autopilot(entry: Arc<Entry>) {
    for _ in 0..AUTO_FRAME_LIMIT {
        let e = entry.clone();
        let step = tokio::task::spawn_blocking(move || {
            e.update(|l| if l.status().is_terminal() { Ok(()) } else { l.autopilot_step().map(|_| ()) })
        })
        .await;
        match step {
            Ok(Ok(state)) if state.status == "InProgress" => {}
            Ok(Err(e)) => {
                tracing::warn!(session = %entry.id, error = %e, "autopilot stopped");
                return;
            }
            _ => return,
        }
    }
}

async fn get_state(State(app): State<Arc<ServiceState>>, Path(id): Path<String>) -> Result<Json<FrameStateJson>, ApiError> {
    let entry = app.entry(&id)?;
    let live = entry.live.lock().expect("session lock");
    Ok(Json(FrameStateJson::from(live.state())))
}

async fn steer(
    State(app): State<Arc<ServiceState>>,
    Path(id): Path<String>,
    body: Result<Json<SteerRequest>, JsonRejection>,
) -> Result<Json<FrameStateJson>, ApiError> {
    let entry = app.entry(&id)?;
    let Json(req) = body?;
    if entry.mode != Mode::Manual {
        return Err(ApiError::new(StatusCode::CONFLICT, "session is in auto mode"));
    }
    if !(req.pan.is_finite() && req.tilt.is_finite()) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "pan and tilt must be finite"));
    }
    let state = tokio::task::spawn_blocking(move || entry.update(|l| l.steer(req.pan, req.tilt).map(|_| ())))
        .await
        .map_err(internal)??;
    Ok(Json(state))
}

async fn stream_states(
    State(app): State<Arc<ServiceState>>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let entry = app.entry(&id)?;
    let (rx, current) = {
        let live = entry.live.lock().expect("session lock");
        (entry.tx.subscribe(), FrameStateJson::from(live.state()))
    };
    let events = stream::unfold((Some(current), rx, None::<u64>, false), |(first, mut rx, last, done)| async move {
        if done {
            return None;
        }
        let state = match first {
            Some(s) => s,
            None => loop {
                match rx.recv().await {
                    Ok(s) if last.is_some_and(|l| s.frame <= l) => continue,
                    Ok(s) => break s,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => return None,
                }
            },
        };
        let terminal = state.status != "InProgress";
        let event = Event::default().data(serde_json::to_string(&state).expect("serializable"));
        Some((Ok(event), (None, rx, Some(state.frame), terminal)))
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}
