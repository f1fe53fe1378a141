//! Single-writer service wrapper around [`MissionDb`] plus its HTTP API.

use std::convert::Infallible;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

use super::{C2Error, MissionDb, Notification, VehiclePhase, VehicleRecord};
use crate::acoustic::{decode_frame, AcousticFrame, CommandCode};
use crate::dialogue::{self, Reply, Slots};
use crate::domain::GeoPoint;

#[derive(Debug, Clone, Serialize)]
pub struct VehicleView {
    pub id: u8,
    pub name: String,
    pub asset_state: super::AssetState,
    pub phase: VehiclePhase,
    pub last_contact_ms: Option<u64>,
    pub last_heard_s: Option<u64>,
    pub position: Option<GeoPoint>,
    pub battery_pct: Option<u8>,
    pub speed_kn: Option<f64>,
    pub depth_m: Option<f64>,
    pub heading_deg: Option<f64>,
    pub fault_bits: u8,
    pub faults: Vec<&'static str>,
    pub objective_id: Option<u8>,
    pub objective_pct: Option<u8>,
}

impl VehicleView {
    pub fn new(r: &VehicleRecord, now_ms: u64) -> Self {
        let s = r.last_status;
        Self {
            id: r.id,
            name: r.name.clone(),
            asset_state: r.asset_state,
            phase: r.phase,
            last_contact_ms: r.last_contact_ms,
            last_heard_s: r.last_heard_s(now_ms),
            position: r.position,
            battery_pct: s.map(|s| s.battery_pct),
            speed_kn: s.map(|s| s.speed_kn()),
            depth_m: s.map(|s| s.depth_m()),
            heading_deg: s.map(|s| s.heading_deg()),
            fault_bits: r.faults.bits(),
            faults: r.faults.names(),
            objective_id: s.and_then(|s| (s.objective_id != 0).then_some(s.objective_id)),
            objective_pct: s.and_then(|s| (s.objective_id != 0).then_some(s.objective_pct)),
        }
    }
}

/// Everything the service publishes, in the order it happened.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    Notification(Notification),
    Unpinned { id: u64, t_ms: u64 },
    Vehicle(VehicleView),
    Chat { t_ms: u64, session: String, text: String, reply: String, intent: String, ok: bool },
}

impl StreamEvent {
    fn name(&self) -> &'static str {
        match self {
            StreamEvent::Notification(_) => "notification",
            StreamEvent::Unpinned { .. } => "unpinned",
            StreamEvent::Vehicle(_) => "vehicle",
            StreamEvent::Chat { .. } => "chat",
        }
    }
}

/// Owns the database, the C2 clock and the queue of frames to transmit.
pub struct C2Service {
    db: MissionDb,
    now_ms: u64,
    outbox: Vec<AcousticFrame>,
    journal: Vec<StreamEvent>,
    stream: broadcast::Sender<StreamEvent>,
}

pub type SharedC2 = Arc<Mutex<C2Service>>;

impl C2Service {
    pub fn new(db: MissionDb) -> Self {
        let (stream, _) = broadcast::channel(1024);
        Self { db, now_ms: 0, outbox: Vec::new(), journal: Vec::new(), stream }
    }

    pub fn shared(self) -> SharedC2 {
        Arc::new(Mutex::new(self))
    }

    pub fn db(&self) -> &MissionDb {
        &self.db
    }

    pub fn db_mut(&mut self) -> &mut MissionDb {
        &mut self.db
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.stream.subscribe()
    }

    fn publish(&mut self, ev: StreamEvent) {
        let _ = self.stream.send(ev.clone());
        self.journal.push(ev);
    }

    fn publish_notes(&mut self, notes: Vec<Notification>) {
        for n in notes {
            self.publish(StreamEvent::Notification(n));
        }
        for id in self.db.drain_unpinned() {
            self.publish(StreamEvent::Unpinned { id, t_ms: self.now_ms });
        }
    }

    fn advance(&mut self, now_ms: u64) {
        self.now_ms = self.now_ms.max(now_ms);
    }

    /// Ingests one relayed frame.
    pub fn ingest(&mut self, bytes: &[u8], now_ms: u64) {
        self.advance(now_ms);
        let notes = self.db.ingest_bytes(bytes, self.now_ms);
        self.publish_notes(notes);
        if let Some(r) = decode_frame(bytes).ok().and_then(|f| self.db.vehicle(f.src)) {
            let view = VehicleView::new(r, self.now_ms);
            self.publish(StreamEvent::Vehicle(view));
        }
    }

    /// Runs retry timers and liveness refresh.
    pub fn tick(&mut self, now_ms: u64) {
        self.advance(now_ms);
        let (resend, mut notes) = self.db.poll_retries(self.now_ms);
        self.outbox.extend(resend);
        let before: Vec<_> = self.db.vehicles().map(|r| r.asset_state).collect();
        notes.extend(self.db.refresh_asset_states(self.now_ms));
        self.publish_notes(notes);
        let changed: Vec<VehicleView> = self
            .db
            .vehicles()
            .zip(before)
            .filter(|(r, b)| r.asset_state != *b)
            .map(|(r, _)| VehicleView::new(r, self.now_ms))
            .collect();
        for v in changed {
            self.publish(StreamEvent::Vehicle(v));
        }
    }

    pub fn chat(&mut self, session: &str, text: &str) -> Reply {
        let reply = dialogue::handle(session, text, &mut self.db, self.now_ms);
        self.outbox.extend(reply.frames.iter().cloned());
        self.publish(StreamEvent::Chat {
            t_ms: self.now_ms,
            session: session.to_string(),
            text: text.to_string(),
            reply: reply.text.clone(),
            intent: reply.intent.name.as_str().to_string(),
            ok: reply.ok,
        });
        reply
    }

    pub fn command(&mut self, vehicle_id: u8, cmd: CommandCode) -> Result<u16, C2Error> {
        let (frame, seq) = self.db.issue_command(vehicle_id, cmd, self.now_ms)?;
        self.outbox.push(frame);
        Ok(seq)
    }

    /// Frames waiting to be handed to the relay.
    pub fn take_outbox(&mut self) -> Vec<AcousticFrame> {
        std::mem::take(&mut self.outbox)
    }

    pub fn take_journal(&mut self) -> Vec<StreamEvent> {
        std::mem::take(&mut self.journal)
    }
}

#[derive(Clone)]
struct AppState {
    c2: SharedC2,
    static_dir: Option<Arc<PathBuf>>,
}

pub fn router(c2: SharedC2, static_dir: Option<PathBuf>) -> Router {
    Router::new()
        .route("/api/vehicles", get(get_vehicles))
        .route("/api/mission", get(get_mission))
        .route("/api/notifications", get(get_notifications))
        .route("/api/chat", post(post_chat))
        .route("/api/command", post(post_command))
        .route("/api/stream", get(get_stream))
        .fallback(get(static_file))
        .with_state(AppState { c2, static_dir: static_dir.map(Arc::new) })
}

/// Serves the API (and optional static assets) until the task is dropped.
pub async fn serve(
    c2: SharedC2,
    listener: tokio::net::TcpListener,
    static_dir: Option<PathBuf>,
) -> std::io::Result<()> {
    axum::serve(listener, router(c2, static_dir)).await
}

fn error(status: StatusCode, code: &str, message: String) -> Response {
    (status, Json(json!({ "error": code, "message": message }))).into_response()
}

async fn get_vehicles(State(app): State<AppState>) -> Json<Vec<VehicleView>> {
    let c2 = app.c2.lock().expect("c2 lock");
    Json(c2.db.vehicles().map(|r| VehicleView::new(r, c2.now_ms)).collect())
}

async fn get_mission(State(app): State<AppState>) -> Json<serde_json::Value> {
    let c2 = app.c2.lock().expect("c2 lock");
    Json(json!({
        "plan": c2.db.plan(),
        "objectives": c2.db.objectives().collect::<Vec<_>>(),
        "progress": c2.db.mission_progress(),
        "decisions": c2.db.decisions(),
        "now_ms": c2.now_ms,
    }))
}

#[derive(Deserialize)]
struct NotificationQuery {
    pinned: Option<bool>,
}

async fn get_notifications(State(app): State<AppState>, Query(q): Query<NotificationQuery>) -> Json<Vec<Notification>> {
    let c2 = app.c2.lock().expect("c2 lock");
    Json(c2.db.notifications().iter().filter(|n| q.pinned.is_none_or(|p| n.pinned == p)).cloned().collect())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatRequest {
    #[serde(default = "default_session")]
    session: String,
    text: String,
}

fn default_session() -> String {
    "default".to_string()
}

#[derive(Serialize)]
struct ChatResponse {
    reply_text: String,
    intent_name: &'static str,
    slots: Slots,
    ok: bool,
    staleness_suffix_applied: bool,
}

async fn post_chat(
    State(app): State<AppState>,
    body: Result<Json<ChatRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, "BAD_REQUEST", e.body_text()),
    };
    let reply = app.c2.lock().expect("c2 lock").chat(&req.session, &req.text);
    Json(ChatResponse {
        reply_text: reply.text,
        intent_name: reply.intent.name.as_str(),
        slots: reply.intent.slots,
        ok: reply.ok,
        staleness_suffix_applied: reply.staleness_suffix_applied,
    })
    .into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommandRequest {
    vehicle_id: u8,
    cmd: CommandCode,
}

async fn post_command(
    State(app): State<AppState>,
    body: Result<Json<CommandRequest>, axum::extract::rejection::JsonRejection>,
) -> Response {
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, "BAD_REQUEST", e.body_text()),
    };
    match app.c2.lock().expect("c2 lock").command(req.vehicle_id, req.cmd) {
        Ok(cmd_seq) => Json(json!({ "cmd_seq": cmd_seq })).into_response(),
        Err(e) => error(StatusCode::NOT_FOUND, "UNKNOWN_VEHICLE", e.to_string()),
    }
}

async fn get_stream(State(app): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = app.c2.lock().expect("c2 lock").subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let data = serde_json::to_string(&ev).expect("stream events serialize");
                    return Some((Ok(Event::default().event(ev.name()).data(data)), rx));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(app): State<AppState>, uri: Uri) -> Response {
    let Some(root) = app.static_dir.as_deref() else {
        return error(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no route for {}", uri.path()));
    };
    let rel = Path::new(uri.path().trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return error(StatusCode::BAD_REQUEST, "BAD_PATH", "invalid path".into());
    }
    let mut path = root.join(rel);
    if rel.as_os_str().is_empty() || path.is_dir() {
        path = path.join("index.html");
    }
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => error(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no file for {}", uri.path())),
    }
}
