//! HTTP and WebSocket front of the twin.
//!
//! One mutex guards the twin, so handlers act as a single serialized writer.
//! Stream events get their sequence numbers under that lock, which keeps the
//! broadcast order equal to the order of state changes.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use ivsr_core::command::{CommandError, Verdict};
use ivsr_core::incident::RecordId;
use ivsr_core::library::{InterventionPlan, LibraryError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{broadcast, Mutex, MutexGuard};

use crate::store::StoreError;
use crate::twin::{wall_clock, EnvironmentUpdate, StreamKind, Twin, TwinError, DEFAULT_K};
use crate::wire::format_timestamp;

/// Events a subscriber may fall behind by before it is disconnected.
pub const STREAM_BUFFER: usize = 1024;
pub const TICK: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    pub kind: StreamKind,
    pub payload: Value,
    pub timestamp: String,
}

#[derive(Clone)]
pub struct Gateway {
    twin: Arc<Mutex<Option<Twin>>>,
    events: broadcast::Sender<StreamEvent>,
    seq: Arc<AtomicU64>,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway {
    /// A gateway with no twin loaded yet; every twin endpoint answers 503.
    pub fn new() -> Self {
        let (events, _) = broadcast::channel(STREAM_BUFFER);
        Self {
            twin: Arc::new(Mutex::new(None)),
            events,
            seq: Arc::new(AtomicU64::new(0)),
        }
    }

    pub async fn install(&self, twin: Twin) {
        *self.twin.lock().await = Some(twin);
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.events.subscribe()
    }

    /// Runs `f` on the loaded twin and publishes whatever it queued.
    pub async fn with_twin<T>(&self, f: impl FnOnce(&mut Twin) -> T) -> Result<T, ApiError> {
        let mut guard = self.twin.lock().await;
        let twin = guard.as_mut().ok_or(ApiError::NotLoaded)?;
        let out = f(twin);
        self.publish(&mut guard);
        Ok(out)
    }

    fn publish(&self, guard: &mut MutexGuard<'_, Option<Twin>>) {
        let Some(twin) = guard.as_mut() else { return };
        let stamp = format_timestamp(wall_clock());
        for (kind, payload) in twin.take_events() {
            let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
            // no subscribers is fine
            let _ = self.events.send(StreamEvent {
                seq,
                kind,
                payload,
                timestamp: stamp.clone(),
            });
        }
    }

    /// Advances the twin by `TICK * sim_speed` of simulated time every `TICK` of wall time.
    pub async fn run_ticks(self, sim_speed: f64) {
        let mut interval = tokio::time::interval(TICK);
        interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        let step = TICK.as_secs_f64() * sim_speed;
        loop {
            interval.tick().await;
            let r = self.with_twin(|t| t.advance(step)).await;
            if let Ok(Err(e)) = r {
                tracing::warn!("tick failed: {e}");
            }
        }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/ingest/detection", post(ingest_detection))
            .route("/ingest/environment", post(ingest_environment))
            .route("/status", get(status))
            .route("/recommendations", get(recommendations))
            .route("/plans/{id}/submit", post(submit_plan))
            .route("/tickets/{id}/decision", post(decision))
            .route("/tickets/{id}/dispatch", post(dispatch))
            .route("/tickets/{id}/outcome", post(outcome))
            .route("/replay/{record_id}", get(replay))
            .route("/projection", get(projection))
            .route("/stream", get(stream))
            .with_state(self.clone())
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotLoaded,
    Twin(TwinError),
    BadRequest(String),
}

impl From<TwinError> for ApiError {
    fn from(e: TwinError) -> Self {
        ApiError::Twin(e)
    }
}

fn status_of(e: &TwinError) -> StatusCode {
    match e {
        TwinError::Wire(_) | TwinError::BadRequest(_) => StatusCode::BAD_REQUEST,
        TwinError::NotLocalized { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        TwinError::Store(StoreError::NotFound(_)) | TwinError::UnknownPlan(_) => StatusCode::NOT_FOUND,
        TwinError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        TwinError::Spread(_) => StatusCode::BAD_REQUEST,
        TwinError::Library(LibraryError::BadK) => StatusCode::BAD_REQUEST,
        TwinError::Library(_) => StatusCode::INTERNAL_SERVER_ERROR,
        TwinError::Command(c) => match c {
            CommandError::UnknownTicket(_) | CommandError::UnknownScenario(_) => StatusCode::NOT_FOUND,
            CommandError::IllegalTransition { .. } | CommandError::DuplicateApprover(_) => StatusCode::CONFLICT,
            CommandError::MissingModifiedPlan | CommandError::InvalidPlan(_) => StatusCode::BAD_REQUEST,
            CommandError::Route(_) | CommandError::NoMatches => StatusCode::UNPROCESSABLE_ENTITY,
        },
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (code, body) = match self {
            ApiError::NotLoaded => (
                StatusCode::SERVICE_UNAVAILABLE,
                json!({ "error": "scene and library are not loaded yet" }),
            ),
            ApiError::BadRequest(msg) => (StatusCode::BAD_REQUEST, json!({ "error": msg })),
            ApiError::Twin(e) => {
                let code = status_of(&e);
                let mut body = json!({ "error": e.to_string() });
                if let TwinError::NotLocalized { record_id, .. } = &e {
                    body["record_id"] = json!(record_id);
                }
                (code, body)
            }
        };
        (code, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok<T: Serialize>(code: StatusCode, v: &T) -> ApiResult {
    Ok((code, Json(serde_json::to_value(v).unwrap_or(Value::Null))).into_response())
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn ingest_detection(State(gw): State<Gateway>, body: String) -> ApiResult {
    let r = gw.with_twin(|t| t.ingest_detection(&body)).await??;
    ok(StatusCode::ACCEPTED, &r)
}

async fn ingest_environment(State(gw): State<Gateway>, body: String) -> ApiResult {
    let update: EnvironmentUpdate = parse_body(&body)?;
    let env = gw
        .with_twin(|t| t.set_environment(update).map(|()| t.status().env))
        .await??;
    ok(StatusCode::ACCEPTED, &json!({ "env": env }))
}

async fn status(State(gw): State<Gateway>) -> ApiResult {
    let v = gw.with_twin(|t| serde_json::to_value(t.status_view())).await?;
    ok(StatusCode::OK, &v.unwrap_or(Value::Null))
}

#[derive(Deserialize)]
struct KQuery {
    k: Option<usize>,
}

async fn recommendations(State(gw): State<Gateway>, Query(q): Query<KQuery>) -> ApiResult {
    let r = gw.with_twin(|t| t.recommendations(q.k.unwrap_or(DEFAULT_K))).await??;
    ok(StatusCode::OK, &r)
}

#[derive(Deserialize, Default)]
struct SubmitBody {
    scenario_id: Option<String>,
}

async fn submit_plan(State(gw): State<Gateway>, Path(plan_id): Path<String>, body: String) -> ApiResult {
    let b: SubmitBody = if body.trim().is_empty() { SubmitBody::default() } else { parse_body(&body)? };
    let t = gw
        .with_twin(|t| t.submit_plan(&plan_id, b.scenario_id.as_deref()))
        .await??;
    ok(StatusCode::CREATED, &t)
}

#[derive(Deserialize)]
struct DecisionBody {
    verdict: Verdict,
    approver_id: String,
    #[serde(default)]
    modified_plan: Option<InterventionPlan>,
}

async fn decision(State(gw): State<Gateway>, Path(id): Path<u64>, body: String) -> ApiResult {
    let b: DecisionBody = parse_body(&body)?;
    let t = gw
        .with_twin(|t| t.decide(id, &b.approver_id, b.verdict, b.modified_plan))
        .await??;
    ok(StatusCode::OK, &t)
}

async fn dispatch(State(gw): State<Gateway>, Path(id): Path<u64>) -> ApiResult {
    let t = gw.with_twin(|t| t.dispatch(id)).await??;
    ok(StatusCode::OK, &t)
}

#[derive(Deserialize)]
struct OutcomeBody {
    success: bool,
    #[serde(default)]
    note: String,
}

async fn outcome(State(gw): State<Gateway>, Path(id): Path<u64>, body: String) -> ApiResult {
    let b: OutcomeBody = parse_body(&body)?;
    let t = gw.with_twin(|t| t.report_outcome(id, b.success, &b.note)).await??;
    ok(StatusCode::OK, &t)
}

async fn replay(State(gw): State<Gateway>, Path(record_id): Path<u64>) -> ApiResult {
    let ev = gw.with_twin(|t| t.replay(RecordId(record_id))).await??;
    ok(StatusCode::OK, &ev)
}

#[derive(Deserialize)]
struct HorizonQuery {
    horizon_s: f64,
}

async fn projection(State(gw): State<Gateway>, Query(q): Query<HorizonQuery>) -> ApiResult {
    let p = gw.with_twin(|t| t.projection(q.horizon_s)).await??;
    ok(StatusCode::OK, &p)
}

async fn stream(State(gw): State<Gateway>, ws: WebSocketUpgrade) -> Response {
    let rx = gw.subscribe();
    ws.on_upgrade(move |socket| forward(socket, rx))
}

/// Pushes events to one subscriber until it disconnects or falls too far behind.
async fn forward(socket: WebSocket, mut rx: broadcast::Receiver<StreamEvent>) {
    let (mut tx, mut incoming) = socket.split();
    loop {
        tokio::select! {
            ev = rx.recv() => match ev {
                Ok(ev) => {
                    let text = serde_json::to_string(&ev).unwrap_or_default();
                    if tx.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::info!("closing stream subscriber {n} events behind");
                    let _ = tx.send(Message::Close(None)).await;
                    return;
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            msg = incoming.next() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}
