//! HTTP service for live play sessions.
//!
//! Routes live under `/api/v1/sessions`. Errors are JSON `{code, message}`
//! with 404 for unknown sessions, 409 for finished ones and 400 for bad
//! requests. Choice indices are zero-based.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rhirl_core::engine::{apply_action, applicable_actions, initial_state, ActionInstance, ActionKind, GameState};
use rhirl_core::trace::{PlayerProfile, Trace, TraceSource};
use rhirl_core::WorldSpec;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex as AsyncMutex;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

use crate::questionnaire::normalize;
use crate::store::TraceStore;

pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Finished,
    Abandoned,
}

struct Session {
    id: String,
    state: GameState,
    log: Vec<(ActionInstance, u64)>,
    narration: String,
    profile: Option<PlayerProfile>,
    status: SessionStatus,
    trace_id: Option<String>,
    started: Instant,
    touched: Instant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ServiceError {
    status: StatusCode,
    body: ApiError,
}

impl ServiceError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ApiError {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }

    fn unknown(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}"))
    }

    fn finished() -> Self {
        Self::new(StatusCode::CONFLICT, "session_finished", "the session no longer accepts changes")
    }

    fn invalid_choice(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_choice", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireAction {
    pub kind: ActionKind,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl WireAction {
    fn of(world: &WorldSpec, a: &ActionInstance) -> Self {
        Self {
            kind: a.kind(),
            target: a.target_id(world).to_string(),
            key: a.key_id(world).map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub index: usize,
    pub label: String,
    pub action: WireAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotProgress {
    pub visited: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presentation {
    pub session_id: String,
    pub status: SessionStatus,
    pub narration: String,
    pub location: String,
    pub inventory: Vec<String>,
    pub choices: Vec<Choice>,
    pub plot_progress: PlotProgress,
    pub is_terminal: bool,
    pub ending: Option<String>,
    pub profile: Option<PlayerProfile>,
    pub trace_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    pub newly_visited_plot_points: Vec<String>,
    #[serde(flatten)]
    pub view: Presentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishResult {
    pub session_id: String,
    pub trace_id: String,
    pub end_reached: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionRequest {
    #[serde(default)]
    choice: Option<usize>,
    #[serde(default)]
    action: Option<WireAction>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRequest {
    answers: [u8; 4],
}

pub struct AppState {
    world: Arc<WorldSpec>,
    store: TraceStore,
    ttl: Duration,
    sessions: Mutex<HashMap<String, Arc<AsyncMutex<Session>>>>,
}

impl AppState {
    pub fn new(world: WorldSpec, store: TraceStore, ttl: Duration) -> Arc<Self> {
        Arc::new(Self {
            world: Arc::new(world),
            store,
            ttl,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    fn lookup(&self, id: &str) -> ApiResult<Arc<AsyncMutex<Session>>> {
        self.sessions
            .lock()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::unknown(id))
    }

    fn present(&self, s: &Session) -> Presentation {
        let w = &*self.world;
        let is_terminal = s.state.is_terminal(w);
        let choices = if s.status == SessionStatus::Active {
            applicable_actions(w, &s.state)
                .iter()
                .enumerate()
                .map(|(index, a)| Choice {
                    index,
                    label: a.label(w),
                    action: WireAction::of(w, a),
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut inventory: Vec<String> = s.state.inventory().map(|o| w.object(o).id.clone()).collect();
        inventory.sort();
        Presentation {
            session_id: s.id.clone(),
            status: s.status,
            narration: s.narration.clone(),
            location: w.location(s.state.current_location()).id.clone(),
            inventory,
            choices,
            plot_progress: PlotProgress {
                visited: s.state.visited_plot_points().count(),
                total: w.plot_points().len(),
            },
            is_terminal,
            ending: s.state.ending(w).map(|e| w.plot_point(e).id.clone()),
            profile: s.profile,
            trace_id: s.trace_id.clone(),
        }
    }

    /// Writes the session's trace once; later calls return the same id.
    fn persist(&self, s: &mut Session) -> ApiResult<String> {
        if let Some(id) = &s.trace_id {
            return Ok(id.clone());
        }
        let trace = Trace::from_actions(
            &self.world,
            s.id.clone(),
            format!("player-{}", &s.id[..8]),
            TraceSource::Human,
            s.profile,
            &s.log,
        )
        .map_err(|e| ServiceError::internal(e.to_string()))?;
        self.store
            .save(&trace)
            .map_err(|e| ServiceError::internal(e.to_string()))?;
        s.trace_id = Some(trace.trace_id.clone());
        Ok(trace.trace_id)
    }

    pub async fn create(&self) -> Presentation {
        let id = uuid::Uuid::new_v4().to_string();
        let state = initial_state(&self.world);
        let now = Instant::now();
        let session = Session {
            id: id.clone(),
            narration: self.world.location(state.current_location()).text.clone(),
            state,
            log: Vec::new(),
            profile: None,
            status: SessionStatus::Active,
            trace_id: None,
            started: now,
            touched: now,
        };
        let view = self.present(&session);
        self.sessions
            .lock()
            .expect("session map")
            .insert(id, Arc::new(AsyncMutex::new(session)));
        view
    }

    pub async fn get(&self, id: &str) -> ApiResult<Presentation> {
        let session = self.lookup(id)?;
        let s = session.lock().await;
        Ok(self.present(&s))
    }

    async fn act(&self, id: &str, req: ActionRequest) -> ApiResult<ActionResult> {
        let session = self.lookup(id)?;
        let mut s = session.lock().await;
        if s.status != SessionStatus::Active {
            return Err(ServiceError::finished());
        }
        let w = &*self.world;
        let choices = applicable_actions(w, &s.state);
        let action = match (req.choice, req.action) {
            (Some(i), None) => *choices
                .get(i)
                .ok_or_else(|| ServiceError::invalid_choice(format!("choice {i} is out of range 0..{}", choices.len())))?,
            (None, Some(wire)) => *choices
                .iter()
                .find(|a| WireAction::of(w, a) == wire)
                .ok_or_else(|| ServiceError::invalid_choice("that action is not available now"))?,
            _ => return Err(ServiceError::bad_request("send exactly one of `choice` or `action`")),
        };
        let outcome = apply_action(w, &s.state, &action)
            .map_err(|e| ServiceError::internal(format!("served choice was not applicable: {e}")))?;
        let t_ms = s.started.elapsed().as_millis() as u64;
        s.log.push((action, t_ms));
        s.state = outcome.next_state;
        s.narration = outcome.narration;
        s.touched = Instant::now();
        if outcome.is_terminal {
            s.status = SessionStatus::Finished;
        }
        Ok(ActionResult {
            newly_visited_plot_points: outcome
                .newly_visited_plot_points
                .iter()
                .map(|p| w.plot_point(*p).id.clone())
                .collect(),
            view: self.present(&s),
        })
    }

    /// Accepted until the trace has been written, so a player who reached an
    /// ending can still answer.
    async fn profile(&self, id: &str, req: ProfileRequest) -> ApiResult<PlayerProfile> {
        let session = self.lookup(id)?;
        let mut s = session.lock().await;
        if s.trace_id.is_some() {
            return Err(ServiceError::finished());
        }
        let p = normalize(req.answers).map_err(ServiceError::bad_request)?;
        s.profile = Some(p);
        s.touched = Instant::now();
        Ok(p)
    }

    pub async fn finish(&self, id: &str) -> ApiResult<FinishResult> {
        let session = self.lookup(id)?;
        let mut s = session.lock().await;
        if s.status == SessionStatus::Active {
            s.status = SessionStatus::Finished;
        }
        let trace_id = self.persist(&mut s)?;
        Ok(FinishResult {
            session_id: s.id.clone(),
            trace_id,
            end_reached: s.state.ending(&self.world).map(|e| self.world.plot_point(e).id.clone()),
        })
    }

    /// Persists sessions idle for longer than the TTL. Returns how many were
    /// swept.
    pub async fn sweep_abandoned(&self, now: Instant) -> usize {
        let all: Vec<_> = self.sessions.lock().expect("session map").values().cloned().collect();
        let mut swept = 0;
        for session in all {
            let mut s = session.lock().await;
            if s.trace_id.is_none() && now.saturating_duration_since(s.touched) >= self.ttl {
                if s.status == SessionStatus::Active {
                    s.status = SessionStatus::Abandoned;
                }
                match self.persist(&mut s) {
                    Ok(_) => swept += 1,
                    Err(e) => tracing::error!(session = %s.id, "could not persist abandoned session: {}", e.body.message),
                }
            }
        }
        swept
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::bad_request(e.to_string()))
}

async fn create_session(State(app): State<Arc<AppState>>) -> impl IntoResponse {
    (StatusCode::CREATED, Json(app.create().await))
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Presentation>> {
    app.get(&id).await.map(Json)
}

async fn post_action(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<ActionResult>> {
    app.lookup(&id)?;
    let req = parse_body(&body)?;
    app.act(&id, req).await.map(Json)
}

async fn post_profile(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<PlayerProfile>> {
    app.lookup(&id)?;
    let req = parse_body(&body)?;
    app.profile(&id, req).await.map(Json)
}

async fn finish_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<FinishResult>> {
    app.finish(&id).await.map(Json)
}

const PLACEHOLDER_INDEX: &str = "<!doctype html><title>rhirl</title><p>The play client is not installed. \
The session API is available under <code>/api/v1/sessions</code>.</p>\n";

/// The full application. `static_dir` holds the built client; `cors_origin`
/// restricts cross-origin access to one origin (any origin when `None`).
pub fn router(app: Arc<AppState>, static_dir: Option<PathBuf>, cors_origin: Option<&str>) -> Router {
    let origin = match cors_origin.and_then(|o| o.parse().ok()) {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
        .allow_headers([axum::http::header::CONTENT_TYPE]);
    let api = Router::new()
        .route("/api/v1/sessions", post(create_session))
        .route("/api/v1/sessions/{id}", get(get_session))
        .route("/api/v1/sessions/{id}/actions", post(post_action))
        .route("/api/v1/sessions/{id}/profile", post(post_profile))
        .route("/api/v1/sessions/{id}/finish", post(finish_session))
        .with_state(app);
    let site = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    };
    site.layer(cors)
}

/// Serves on `listener` until Ctrl-C, sweeping abandoned sessions in the
/// background.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    app: Arc<AppState>,
    static_dir: Option<PathBuf>,
    cors_origin: Option<&str>,
) -> std::io::Result<()> {
    tracing::info!("listening on {}", listener.local_addr()?);
    let sweeper = {
        let app = app.clone();
        let period = (app.ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let n = app.sweep_abandoned(Instant::now()).await;
                if n > 0 {
                    tracing::info!("persisted {n} abandoned sessions");
                }
            }
        })
    };
    let result = axum::serve(listener, router(app, static_dir, cors_origin))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    sweeper.abort();
    result
}
