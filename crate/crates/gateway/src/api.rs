use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;
use twinflow_core::circuit::{auto_layout, CircuitGraph};
use twinflow_core::diagnosis::{HistoryError, Label, StateWord};
use twinflow_core::link::{SensorFrame, SharedLink};
use twinflow_core::logic::{emit_equations, EquationSet, Format, Step};
use twinflow_core::runtime::{Command, CommandError, Event, TwinError};

use crate::engine::{EngineError, EngineHandle};
use crate::hub::{Published, Start};

#[derive(Clone)]
pub struct AppState {
    pub engine: EngineHandle,
    pub graph: Arc<CircuitGraph>,
    pub equations: Arc<EquationSet>,
    /// Present when an external physical system exchanges frames over HTTP.
    pub external: Option<SharedLink>,
    pub heartbeat: Duration,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/circuit", get(circuit))
        .route("/equations", get(equations))
        .route("/state", get(current_state))
        .route("/warnings", get(warnings))
        .route("/warnings/{id}/ack", post(ack))
        .route("/history", get(history))
        .route("/history/{word}/label", post(label))
        .route("/command", post(command))
        .route("/events", get(events))
        .route("/ps/frame", post(ps_frame))
        .route("/ps/actuate", get(ps_actuate))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Twin(TwinError::Command(CommandError::UnknownWarning(_))) => StatusCode::NOT_FOUND,
            EngineError::Twin(TwinError::Command(CommandError::NothingPending)) => StatusCode::CONFLICT,
            EngineError::Twin(TwinError::Command(_)) => StatusCode::BAD_REQUEST,
            EngineError::Twin(TwinError::History(HistoryError::UnknownWord(_))) => StatusCode::NOT_FOUND,
            EngineError::Twin(TwinError::History(HistoryError::WidthMismatch { .. })) => StatusCode::BAD_REQUEST,
            EngineError::Stopped => StatusCode::SERVICE_UNAVAILABLE,
            EngineError::Twin(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

async fn circuit(State(s): State<AppState>) -> Json<Value> {
    Json(json!({
        "graph": &*s.graph,
        "variables": s.graph.variables(),
        "layout": auto_layout(&s.graph),
    }))
}

async fn equations(State(s): State<AppState>) -> Json<Value> {
    let steps = [Step::One, Step::Two, Step::Three, Step::Four];
    let structured: Value =
        serde_json::from_str(&emit_equations(&s.graph, &s.equations, &steps, Format::Json, false)).unwrap_or(Value::Null);
    Json(json!({
        "equations": structured,
        "text": emit_equations(&s.graph, &s.equations, &steps, Format::Text, true),
    }))
}

async fn current_state(State(s): State<AppState>) -> Response {
    Json(&*s.engine.latest()).into_response()
}

async fn warnings(State(s): State<AppState>) -> Json<Value> {
    let latest = s.engine.latest();
    let snap = &latest.snapshot;
    Json(json!({
        "seq": snap.seq,
        "head": snap.pending.first(),
        "pending": snap.pending,
        "warnings": snap.warnings,
    }))
}

async fn ack(State(s): State<AppState>, Path(id): Path<u64>) -> Result<Json<Value>, ApiError> {
    s.engine.submit(Command::AckWarning { id }).await?;
    let latest = s.engine.latest();
    let warning = latest.snapshot.warnings.iter().find(|w| w.id == id);
    Ok(Json(json!({ "seq": latest.snapshot.seq, "warning": warning })))
}

async fn history(State(s): State<AppState>) -> Json<Value> {
    let latest = s.engine.latest();
    Json(json!({ "records": latest.history }))
}

#[derive(Deserialize)]
struct LabelBody {
    label: Label,
    #[serde(default)]
    note: Option<String>,
}

async fn label(
    State(s): State<AppState>,
    Path(word): Path<String>,
    Json(body): Json<LabelBody>,
) -> Result<Json<Value>, ApiError> {
    let word: StateWord = word
        .parse()
        .map_err(|e: twinflow_core::diagnosis::WordError| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let record = s.engine.label(word, body.label, body.note).await?;
    Ok(Json(json!({ "record": record })))
}

async fn command(State(s): State<AppState>, Json(cmd): Json<Command>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let immediate = matches!(cmd, Command::AckWarning { .. });
    s.engine.submit(cmd).await?;
    let status = if immediate { StatusCode::OK } else { StatusCode::ACCEPTED };
    Ok((status, Json(json!({ "accepted": true, "seq": s.engine.latest().snapshot.seq }))))
}

#[derive(Deserialize)]
struct EventsQuery {
    since_seq: Option<u64>,
}

fn sse_event(ev: &Event) -> SseEvent {
    let kind = serde_json::to_value(ev.kind).ok();
    SseEvent::default()
        .id(ev.seq.to_string())
        .event(kind.as_ref().and_then(Value::as_str).unwrap_or("event"))
        .json_data(ev)
        .expect("event serializes")
}

fn resync_event(p: &Published) -> SseEvent {
    SseEvent::default()
        .id(p.snapshot.seq.to_string())
        .event("resync")
        .json_data(&p.snapshot)
        .expect("snapshot serializes")
}

async fn events(
    State(s): State<AppState>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let since = q.since_seq.or_else(|| {
        headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok())
    });
    let (start, rx) = s.engine.hub().subscribe(since);
    let (first, last): (Vec<SseEvent>, u64) = match start {
        Start::Replay(evs) => {
            let last = evs.last().map_or(since.unwrap_or(0), |e| e.seq);
            (evs.iter().map(sse_event).collect(), last)
        }
        Start::Resync(p) => (vec![resync_event(&p)], p.snapshot.seq),
    };
    let engine = s.engine.clone();
    let live = stream::unfold((rx, last), move |(mut rx, mut last)| {
        let engine = engine.clone();
        async move {
            loop {
                match rx.recv().await {
                    // anything already covered by the replay or a resync
                    Ok(ev) if ev.seq <= last => continue,
                    Ok(ev) => {
                        last = ev.seq;
                        return Some((sse_event(&ev), (rx, last)));
                    }
                    Err(RecvError::Lagged(_)) => {
                        let p = engine.latest();
                        last = p.snapshot.seq;
                        return Some((resync_event(&p), (rx, last)));
                    }
                    Err(RecvError::Closed) => return None,
                }
            }
        }
    });
    let stream = stream::iter(first).chain(live).map(Ok);
    Sse::new(stream).keep_alive(KeepAlive::new().interval(s.heartbeat).text("heartbeat"))
}

fn external(s: &AppState) -> Result<&SharedLink, ApiError> {
    s.external
        .as_ref()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "not serving an external physical system"))
}

async fn ps_frame(State(s): State<AppState>, Json(frame): Json<SensorFrame>) -> Result<StatusCode, ApiError> {
    external(&s)?.submit_frame(frame);
    Ok(StatusCode::NO_CONTENT)
}

async fn ps_actuate(State(s): State<AppState>) -> Result<Json<Value>, ApiError> {
    let (version, actuate) = external(&s)?.latest_actuate();
    Ok(Json(json!({ "version": version, "actuate": actuate })))
}
