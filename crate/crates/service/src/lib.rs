//! Local HTTP service for the eeglog engine.
//!
//! All routes live under `/api/v1`. Request and response bodies are JSON
//! documents carrying `format_version`; errors come back as
//! `{"format_version": 1, "error": {"code", "message"}}`.

pub mod ops;
pub mod stream;

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use chrono::FixedOffset;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use eeglog_core::analytics::{parse_utc_offset, utc, Period, Span};
use eeglog_core::classifier::TrainOptions;
use eeglog_core::datamodel::{profile_by_id, EmotionQuadrant, Epoch, Scope, SessionLog, Target};
use eeglog_core::ingest::{ingest_session, RecordingStatus};
use eeglog_core::store::{encode_document, Store, FORMAT_VERSION};
use eeglog_core::{Error, ErrorCode};

use crate::stream::{SampleFrame, StreamDetector, StreamMessage};

pub const DEFAULT_PORT: u16 = 8787;
pub const DEFAULT_RECOMMEND_LIMIT: usize = 10;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Root of the public dataset used for general models.
    pub public_root: Option<PathBuf>,
    /// Calendar offset used when a query does not pass `tz`.
    pub utc_offset: FixedOffset,
    pub bind: SocketAddr,
    pub seed: u64,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            public_root: None,
            utc_offset: utc(),
            bind: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)),
            seed: 0,
        }
    }
}

pub struct AppState {
    pub store: Store,
    pub config: ServiceConfig,
    /// (device, scope) keys with a training job running.
    training: Mutex<HashSet<(String, Scope)>>,
    /// Serializes ingestion so the existence check and the write agree.
    ingest: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn open(config: ServiceConfig) -> eeglog_core::Result<Arc<Self>> {
        Ok(Arc::new(Self {
            store: Store::open(&config.data_dir)?,
            config,
            training: Mutex::new(HashSet::new()),
            ingest: tokio::sync::Mutex::new(()),
        }))
    }
}

#[derive(Debug)]
pub enum ApiError {
    Domain(Error),
    /// Request could not be decoded.
    BadRequest { code: ErrorCode, message: String },
    Busy(String),
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError::Domain(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// HTTP status for a domain error.
pub fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::InvalidInput | ErrorCode::VersionMismatch | ErrorCode::MalformedDocument => {
            StatusCode::BAD_REQUEST
        }
        ErrorCode::NotFound | ErrorCode::UnknownProfile => StatusCode::NOT_FOUND,
        ErrorCode::AlreadyExists => StatusCode::CONFLICT,
        ErrorCode::Io => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::Domain(e) => (
                status_for(e.code()),
                ErrorBody {
                    code: e.code().as_str().into(),
                    message: e.to_string(),
                },
            ),
            ApiError::BadRequest { code, message } => (
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    code: code.as_str().into(),
                    message,
                },
            ),
            ApiError::Busy(message) => (
                StatusCode::CONFLICT,
                ErrorBody {
                    code: "TrainingInProgress".into(),
                    message,
                },
            ),
        };
        document(status, &serde_json::json!({ "error": body }))
    }
}

fn document<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match encode_document(value) {
        Ok(text) => (status, [(header::CONTENT_TYPE, "application/json")], text).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

pub struct Doc<T>(pub T);

impl<T: Serialize> IntoResponse for Doc<T> {
    fn into_response(self) -> Response {
        document(StatusCode::OK, &self.0)
    }
}

type ApiResult<T> = Result<Doc<T>, ApiError>;

/// Decodes a request body. `format_version` is optional, but must match
/// when present.
pub fn decode_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let bad = |code, message: String| ApiError::BadRequest { code, message };
    let mut value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| bad(ErrorCode::MalformedDocument, format!("request body: {e}")))?;
    if let Some(obj) = value.as_object_mut() {
        match obj.remove("format_version") {
            None => {}
            Some(v) if v.as_u64() == Some(FORMAT_VERSION as u64) => {}
            Some(v) => {
                return Err(bad(
                    ErrorCode::VersionMismatch,
                    format!("format_version {v} is not supported (expected {FORMAT_VERSION})"),
                ))
            }
        }
    }
    serde_json::from_value(value).map_err(|e| bad(ErrorCode::MalformedDocument, format!("request body: {e}")))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::BadRequest {
        code: ErrorCode::InvalidInput,
        message: e.body_text(),
    })
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, ApiError> {
    Ok(s.parse()?)
}

fn tz_or_default(state: &AppState, tz: Option<&str>) -> Result<FixedOffset, ApiError> {
    match tz {
        Some(s) => Ok(parse_utc_offset(s)?),
        None => Ok(state.config.utc_offset),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/sessions", post(post_session))
        .route("/summary", get(summary))
        .route("/activity", get(activity))
        .route("/moments", get(moments))
        .route("/recommend", get(recommend))
        .route("/train", post(train))
        .route("/detect", post(detect))
        .route("/models", get(models))
        .route("/stream", get(stream));
    Router::new().nest("/api/v1", api).with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> eeglog_core::Result<()> {
    let bind = config.bind;
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| Error::io(format!("bind {bind}"), e))?;
    axum::serve(listener, router(state))
        .await
        .map_err(|e| Error::io(format!("serve {bind}"), e))
}

async fn health() -> Doc<serde_json::Value> {
    Doc(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub session_id: String,
    pub user_id: String,
    pub recording: RecordingStatus,
}

/// Files a session. When `recording_ref` names a readable file (absolute,
/// or relative to `base`), the recording is checked and copied in.
pub fn ingest_with_ref(store: &Store, session: &SessionLog, base: &Path) -> eeglog_core::Result<IngestResponse> {
    let candidate = base.join(&session.recording_ref);
    let recording = (!session.recording_ref.is_empty() && candidate.is_file()).then_some(candidate);
    let (stored, status) = ingest_session(store, session, recording.as_deref())?;
    Ok(IngestResponse {
        session_id: stored.session_id,
        user_id: stored.user_id,
        recording: status,
    })
}

async fn post_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<IngestResponse> {
    let session: SessionLog = decode_body(&body)?;
    let _queue = state.ingest.lock().await;
    let base = std::env::current_dir().unwrap_or_default();
    Ok(Doc(ingest_with_ref(&state.store, &session, &base)?))
}

#[derive(Debug, Deserialize)]
pub struct SummaryQuery {
    pub user: String,
    pub week: String,
    pub tz: Option<String>,
}

async fn summary(
    State(state): State<Arc<AppState>>,
    q: Result<Query<SummaryQuery>, QueryRejection>,
) -> ApiResult<eeglog_core::analytics::ActivitySummary> {
    let q = query(q)?;
    let tz = tz_or_default(&state, q.tz.as_deref())?;
    let week: Period = parse(&q.week)?;
    Ok(Doc(ops::summary(&state.store, &q.user, &week, &tz)?))
}

#[derive(Debug, Deserialize)]
pub struct ActivityQuery {
    pub user: String,
    pub span: String,
    pub dimension: String,
    /// Explicit period (`YYYY-MM-DD`, `YYYY-Www` or `YYYY-MM`).
    pub period: Option<String>,
    /// Any day inside the wanted period. Without `period` or `at`, the day
    /// of the latest report is used.
    pub at: Option<String>,
    pub tz: Option<String>,
}

/// Period an activity query refers to.
pub fn resolve_activity_period(
    store: &Store,
    user: &str,
    span: Span,
    period: Option<&str>,
    at: Option<&str>,
    tz: &FixedOffset,
) -> eeglog_core::Result<Period> {
    if let Some(p) = period {
        let p: Period = p.parse()?;
        if p.span() != span {
            return Err(Error::InvalidInput(format!("period `{p}` does not match span `{span}`")));
        }
        return Ok(p);
    }
    let day = match at {
        Some(d) => chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d")
            .map_err(|_| Error::InvalidInput(format!("`{d}` is not a date (YYYY-MM-DD)")))?,
        None => ops::latest_day(store, user, tz)?,
    };
    Ok(Period::containing(span, day))
}

async fn activity(
    State(state): State<Arc<AppState>>,
    q: Result<Query<ActivityQuery>, QueryRejection>,
) -> ApiResult<eeglog_core::analytics::ActivitySeries> {
    let q = query(q)?;
    let tz = tz_or_default(&state, q.tz.as_deref())?;
    let span: Span = parse(&q.span)?;
    let dimension: Target = parse(&q.dimension)?;
    let period = resolve_activity_period(&state.store, &q.user, span, q.period.as_deref(), q.at.as_deref(), &tz)?;
    Ok(Doc(ops::activity(&state.store, &q.user, &period, dimension, &tz)?))
}

#[derive(Debug, Deserialize)]
pub struct MomentsQuery {
    pub user: String,
    pub month: String,
    pub tz: Option<String>,
}

async fn moments(
    State(state): State<Arc<AppState>>,
    q: Result<Query<MomentsQuery>, QueryRejection>,
) -> ApiResult<eeglog_core::analytics::MemorialMoments> {
    let q = query(q)?;
    let tz = tz_or_default(&state, q.tz.as_deref())?;
    let month: Period = parse(&q.month)?;
    Ok(Doc(ops::moments(&state.store, &q.user, &month, &tz)?))
}

#[derive(Debug, Deserialize)]
pub struct RecommendQuery {
    pub user: String,
    pub quadrant: String,
    pub limit: Option<usize>,
}

async fn recommend(
    State(state): State<Arc<AppState>>,
    q: Result<Query<RecommendQuery>, QueryRejection>,
) -> ApiResult<eeglog_core::recommend::Playlist> {
    let q = query(q)?;
    let quadrant: EmotionQuadrant = parse(&q.quadrant)?;
    let limit = q.limit.unwrap_or(DEFAULT_RECOMMEND_LIMIT);
    Ok(Doc(ops::recommend(&state.store, &q.user, quadrant, limit)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRequest {
    pub device: String,
    pub scope: Scope,
    pub seed: Option<u64>,
}

/// Releases a training key when the job ends, however it ends.
struct TrainingSlot {
    state: Arc<AppState>,
    key: (String, Scope),
}

impl Drop for TrainingSlot {
    fn drop(&mut self) {
        self.state.training.lock().unwrap().remove(&self.key);
    }
}

async fn train(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<ops::TrainReport> {
    let req: TrainRequest = decode_body(&body)?;
    profile_by_id(&req.device)?;
    let key = (req.device.clone(), req.scope);
    if !state.training.lock().unwrap().insert(key.clone()) {
        return Err(ApiError::Busy(format!(
            "{} {} models are already being trained",
            req.device,
            req.scope.as_str()
        )));
    }
    let slot = TrainingSlot {
        state: state.clone(),
        key,
    };
    let opts = TrainOptions {
        seed: req.seed.unwrap_or(state.config.seed),
        ..TrainOptions::default()
    };
    let pair = tokio::task::spawn_blocking(move || {
        let s = &slot.state;
        ops::train(&s.store, &req.device, req.scope, s.config.public_root.as_deref(), &opts)
    })
    .await
    .map_err(|e| Error::InvalidInput(format!("training task failed: {e}")))??;
    Ok(Doc(ops::TrainReport::from_models(&pair.0, &pair.1)))
}

/// Either an inline epoch or a stored trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectRequest {
    pub device: Option<String>,
    pub epoch: Option<Epoch>,
    pub user: Option<String>,
    pub session_id: Option<String>,
    #[serde(default)]
    pub trial: usize,
}

/// Resolves a detect request to (device, epoch).
pub fn detect_input(store: &Store, req: DetectRequest) -> eeglog_core::Result<(String, Epoch)> {
    match (req.epoch, req.session_id) {
        (Some(e), None) => {
            let device = req
                .device
                .ok_or_else(|| Error::InvalidInput("`device` is required with an inline epoch".into()))?;
            let epoch = Epoch::new(e.channels, e.sampling_rate_hz, e.data)?;
            Ok((device, epoch))
        }
        (None, Some(session_id)) => {
            let user = req
                .user
                .ok_or_else(|| Error::InvalidInput("`user` is required with `session_id`".into()))?;
            let (session, epoch) = ops::stored_trial_epoch(store, &user, &session_id, req.trial)?;
            if let Some(d) = req.device {
                if d != session.device_id {
                    return Err(Error::ProfileMismatch {
                        expected: session.device_id,
                        got: d,
                    });
                }
            }
            Ok((session.device_id, epoch))
        }
        _ => Err(Error::InvalidInput(
            "pass exactly one of `epoch` or `session_id`".into(),
        )),
    }
}

async fn detect(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<ops::Detection> {
    let req: DetectRequest = decode_body(&body)?;
    let state2 = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        let (device, epoch) = detect_input(&state2.store, req)?;
        ops::detect(&state2.store, &device, &epoch)
    })
    .await
    .map_err(|e| Error::InvalidInput(format!("detection task failed: {e}")))??;
    Ok(Doc(result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub device_id: String,
    pub scope: Scope,
    pub target: Target,
}

async fn models(State(state): State<Arc<AppState>>) -> ApiResult<serde_json::Value> {
    let list: Vec<ModelEntry> = state
        .store
        .list_models()?
        .into_iter()
        .map(|(device_id, scope, target)| ModelEntry {
            device_id,
            scope,
            target,
        })
        .collect();
    Ok(Doc(serde_json::json!({ "models": list })))
}

#[derive(Debug, Deserialize)]
pub struct StreamQuery {
    pub device: String,
    /// Restrict detection to one scope; both are used by default.
    pub scope: Option<String>,
}

/// Builds the detector for a stream request.
pub fn stream_detector(store: &Store, device: &str, scope: Option<&str>) -> eeglog_core::Result<StreamDetector> {
    let profile = profile_by_id(device)?;
    let scopes = match scope {
        Some(s) => vec![s.parse::<Scope>()?],
        None => vec![Scope::Device, Scope::General],
    };
    let mut pairs = Vec::new();
    for s in scopes {
        match ops::model_pair(store, device, s) {
            Ok(p) => pairs.push(p),
            Err(Error::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
    }
    StreamDetector::new(profile, pairs)
}

async fn stream(
    State(state): State<Arc<AppState>>,
    q: Result<Query<StreamQuery>, QueryRejection>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let q = query(q)?;
    let detector = stream_detector(&state.store, &q.device, q.scope.as_deref());
    Ok(ws.on_upgrade(move |socket| run_stream(socket, detector)))
}

fn to_text(msg: &StreamMessage) -> Message {
    Message::Text(serde_json::to_string(msg).unwrap_or_default().into())
}

/// Close code for policy violations, used for every error exit.
const CLOSE_POLICY: u16 = 1008;

async fn close_with(mut socket: WebSocket, e: &Error) {
    let _ = socket.send(to_text(&StreamMessage::error(e))).await;
    let _ = socket
        .send(Message::Close(Some(CloseFrame {
            code: CLOSE_POLICY,
            reason: e.code().as_str().into(),
        })))
        .await;
}

async fn run_stream(mut socket: WebSocket, detector: eeglog_core::Result<StreamDetector>) {
    let mut detector = match detector {
        Ok(d) => d,
        Err(e) => return close_with(socket, &e).await,
    };
    while let Some(Ok(msg)) = socket.recv().await {
        let frame: SampleFrame = match msg {
            Message::Text(t) => match serde_json::from_str(t.as_str()) {
                Ok(f) => f,
                Err(e) => {
                    let e = Error::InvalidInput(format!("frame: {e}"));
                    return close_with(socket, &e).await;
                }
            },
            Message::Close(_) => break,
            _ => continue,
        };
        match detector.push(&frame) {
            Ok(out) => {
                for m in &out {
                    if socket.send(to_text(m)).await.is_err() {
                        return;
                    }
                }
            }
            Err(e) => return close_with(socket, &e).await,
        }
    }
}
