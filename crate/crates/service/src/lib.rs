//! Localhost HTTP front end for one recognition session at a time.
//!
//! Every request is turned into a session event stamped with the service's
//! monotonic clock, so reaction times never depend on client clocks.
//! Playback runs on its own thread; the service stays responsive meanwhile.
//!
//! | method | path | body |
//! |---|---|---|
//! | POST | /session | session config (JSON), or empty for the default |
//! | DELETE | /session | |
//! | GET | /session/state | |
//! | POST | /session/advance | |
//! | POST | /trial/play | |
//! | POST | /trial/manual-play | `{"label": "u"}` |
//! | POST | /trial/answer | `{"labels": ["u"]}` |
//! | POST | /trial/backspace | |
//! | POST | /trial/confirm | |
//!
//! Successful calls return the participant view. Rejected events return
//! 409 with `{"error", "code"}`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use tactokit::device::{spawn_play, PlayError, PlayOptions, PlaybackReport, Sink};
use tactokit::experiment::{Effect, Event, Session, SessionConfig, StepError};
use tactokit::synth::compile_schedule;
use tactokit::GridGeometry;

pub struct ServiceConfig {
    /// Used when `POST /session` has an empty body.
    pub default_session: Option<SessionConfig>,
    /// Trial records are appended here as JSON lines.
    pub log_path: PathBuf,
    pub geometry: GridGeometry,
    pub play: PlayOptions,
}

impl ServiceConfig {
    pub fn new(log_path: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            default_session: None,
            log_path: log_path.into(),
            geometry: GridGeometry::default(),
            play: PlayOptions::default(),
        }
    }
}

type Playback = JoinHandle<Result<PlaybackReport, PlayError>>;

struct Active {
    session: Session,
    playback: Option<Playback>,
    log: File,
}

struct Inner {
    cfg: ServiceConfig,
    active: Option<Active>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<Inner>>,
    sink: Arc<Mutex<Sink>>,
    origin: Instant,
    epoch_ms: u64,
}

impl AppState {
    pub fn new(cfg: ServiceConfig, sink: Sink) -> Self {
        let epoch_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        AppState {
            inner: Arc::new(Mutex::new(Inner { cfg, active: None })),
            sink: Arc::new(Mutex::new(sink)),
            origin: Instant::now(),
            epoch_ms,
        }
    }

    /// Shared output device; tests use it to inspect a virtual sink.
    pub fn sink(&self) -> Arc<Mutex<Sink>> {
        self.sink.clone()
    }

    /// Service clock origin; `now_ms` is measured from here.
    pub fn origin(&self) -> Instant {
        self.origin
    }

    fn now_ms(&self) -> f64 {
        self.ms_at(Instant::now())
    }

    fn ms_at(&self, t: Instant) -> f64 {
        t.saturating_duration_since(self.origin).as_secs_f64() * 1000.0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub enum ApiError {
    NoSession,
    Busy,
    BadRequest(String),
    Step(StepError),
    Internal(String),
}

fn step_code(e: &StepError) -> &'static str {
    match e {
        StepError::Finished => "finished",
        StepError::OnBreak => "on_break",
        StepError::PhaseComplete => "phase_complete",
        StepError::NotAtBoundary => "not_at_boundary",
        StepError::AlreadyPlayed => "already_played",
        StepError::NotPlayed => "not_played",
        StepError::Busy => "busy",
        StepError::PlaybackInProgress => "playback_in_progress",
        StepError::NoPlayback => "no_playback",
        StepError::EmptyAnswer => "empty_answer",
        StepError::IncompleteAnswer => "incomplete_answer",
        StepError::AnswerFull => "answer_full",
        StepError::InvalidAnswer(_) => "invalid_answer",
        StepError::UnknownLabel(_) => "unknown_label",
        StepError::NotAllowed { .. } => "not_allowed",
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, msg) = match self {
            ApiError::NoSession => (StatusCode::NOT_FOUND, "no_session", "no active session".to_string()),
            ApiError::Busy => (StatusCode::CONFLICT, "session_active", "a session is already running".to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "bad_request", m),
            ApiError::Step(e) => (StatusCode::CONFLICT, step_code(&e), e.to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", m),
        };
        (status, Json(json!({ "error": msg, "code": code }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn view(state: &AppState, active: &Active) -> Response {
    Json(active.session.view(state.now_ms())).into_response()
}

async fn start_session(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let mut inner = state.lock();
    if inner.active.as_ref().is_some_and(|a| !a.session.is_finished()) {
        return Err(ApiError::Busy);
    }
    let cfg = if body.iter().all(u8::is_ascii_whitespace) {
        inner.cfg.default_session.clone().ok_or_else(|| ApiError::BadRequest("no session config given".into()))?
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?
    };
    let epoch = state.epoch_ms;
    let session = Session::new(cfg, epoch).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&inner.cfg.log_path)
        .map_err(|e| ApiError::Internal(format!("{}: {e}", inner.cfg.log_path.display())))?;
    let active = Active { session, playback: None, log };
    let resp = view(&state, &active);
    inner.active = Some(active);
    Ok(resp)
}

async fn end_session(State(state): State<AppState>) -> ApiResult {
    let mut inner = state.lock();
    inner.active.take().ok_or(ApiError::NoSession)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn get_state(State(state): State<AppState>) -> ApiResult {
    let inner = state.lock();
    let active = inner.active.as_ref().ok_or(ApiError::NoSession)?;
    Ok(view(&state, active))
}

/// Feed the measured end of a finished playback into the session so the
/// RT origin is the moment the last frame went out.
fn collect_playback(state: &AppState, active: &mut Active) -> Result<(), ApiError> {
    let Some(handle) = active.playback.take_if(|h| h.is_finished()) else {
        return Ok(());
    };
    match handle.join() {
        Ok(Ok(report)) => {
            let at = state.ms_at(report.finished);
            // rejected only if the session already moved on
            let _ = active.session.step(Event::PlaybackFinished { at_ms: at }, at);
            Ok(())
        }
        Ok(Err(e)) => Err(ApiError::Internal(format!("playback failed: {e}"))),
        Err(_) => Err(ApiError::Internal("playback thread panicked".into())),
    }
}

fn apply(state: &AppState, event: Event) -> ApiResult {
    let mut inner = state.lock();
    let Inner { cfg, active } = &mut *inner;
    let active = active.as_mut().ok_or(ApiError::NoSession)?;
    collect_playback(state, active)?;
    if matches!(event, Event::Confirm) && active.playback.is_some() {
        return Err(ApiError::Step(StepError::PlaybackInProgress));
    }
    let effects = active.session.step(event, state.now_ms()).map_err(ApiError::Step)?;
    for effect in effects {
        match effect {
            Effect::Play { label, .. } => {
                let s = &active.session;
                let pattern = s.pattern_set().get(&label).expect("session only plays its own patterns");
                let schedule = compile_schedule(pattern, s.cues(), s.config().rf, &s.config().timing, &cfg.geometry);
                active.playback = Some(spawn_play(schedule, state.sink.clone(), cfg.play));
            }
            Effect::Record(rec) => {
                let line = serde_json::to_string(&rec).map_err(|e| ApiError::Internal(e.to_string()))?;
                writeln!(active.log, "{line}")
                    .and_then(|_| active.log.flush())
                    .map_err(|e| ApiError::Internal(format!("log write failed: {e}")))?;
            }
            _ => {}
        }
    }
    Ok(view(state, active))
}

async fn play(State(state): State<AppState>) -> ApiResult {
    apply(&state, Event::Play)
}

#[derive(Deserialize)]
struct ManualPlay {
    label: String,
}

async fn manual_play(State(state): State<AppState>, Json(body): Json<ManualPlay>) -> ApiResult {
    apply(&state, Event::ManualPlay { label: body.label })
}

#[derive(Deserialize)]
struct AnswerBody {
    labels: Vec<String>,
}

async fn answer(State(state): State<AppState>, Json(body): Json<AnswerBody>) -> ApiResult {
    apply(&state, Event::Answer { labels: body.labels })
}

async fn backspace(State(state): State<AppState>) -> ApiResult {
    apply(&state, Event::Backspace)
}

async fn confirm(State(state): State<AppState>) -> ApiResult {
    apply(&state, Event::Confirm)
}

async fn advance(State(state): State<AppState>) -> ApiResult {
    apply(&state, Event::Advance)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/session", post(start_session).delete(end_session))
        .route("/session/state", get(get_state))
        .route("/session/advance", post(advance))
        .route("/trial/play", post(play))
        .route("/trial/manual-play", post(manual_play))
        .route("/trial/answer", post(answer))
        .route("/trial/backspace", post(backspace))
        .route("/trial/confirm", post(confirm))
        .with_state(state)
}

/// Bind `addr` and serve until the process exits.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    serve_listener(tokio::net::TcpListener::bind(addr).await?, state).await
}

pub async fn serve_listener(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
