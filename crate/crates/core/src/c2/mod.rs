//! Shore-side mission database: telemetry ingest, asset liveness,
//! notifications, reliable commands and allocation explanations.

mod explain;
mod http;

pub use explain::{ExplainError, Explanation, ExplanationKind};
pub use http::{router, serve, C2Service, SharedC2, StreamEvent};

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::acoustic::{
    decode_frame, decode_payload, encode_payload, AcousticFrame, CommandCode, EventCode, StatusReport,
    TelemetryMessage, KNOT_MPS,
};
use crate::dialogue::{self, DialogueContext};
use crate::domain::{path_length, GeoPoint, MissionPlan, ObjectiveKind, ObjectiveState};
use crate::sim::{
    allocate_objectives, AllocationDecision, Candidate, Faults, Route, VehicleKind, VehicleSpec, BATTERY_RESERVE_PCT,
};

/// Acoustic address the C2 node transmits from.
pub const C2_ADDRESS: u8 = 0;
pub const DEDUP_WINDOW: usize = 64;
pub const COMMAND_RETRY_MS: u64 = 10_000;
pub const MAX_COMMAND_ATTEMPTS: u8 = 3;
pub const STALE_PERIODS: f64 = 3.0;
pub const LOST_PERIODS: f64 = 10.0;
pub const DEFAULT_STATUS_PERIOD_S: f64 = 30.0;

/// Detail values carried by Aborting events.
pub const ABORT_REASON_FAULT: u16 = 1;
pub const ABORT_REASON_BATTERY: u16 = 2;
pub const ABORT_REASON_OPERATOR: u16 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetState {
    Undiscovered,
    Online,
    Stale,
    Lost,
}

impl AssetState {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssetState::Undiscovered => "undiscovered",
            AssetState::Online => "online",
            AssetState::Stale => "stale",
            AssetState::Lost => "lost",
        }
    }
}

/// Liveness as a pure function of the last contact time and status period.
pub fn asset_state_for(last_contact_ms: Option<u64>, now_ms: u64, status_period_s: f64) -> AssetState {
    let Some(last) = last_contact_ms else { return AssetState::Undiscovered };
    let age_s = now_ms.saturating_sub(last) as f64 / 1000.0;
    if age_s > LOST_PERIODS * status_period_s {
        AssetState::Lost
    } else if age_s > STALE_PERIODS * status_period_s {
        AssetState::Stale
    } else {
        AssetState::Online
    }
}

/// What the C2 believes a vehicle is doing, from its events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VehiclePhase {
    Unknown,
    Underway,
    Aborting,
    Recovered,
}

#[derive(Debug, Clone, Serialize)]
pub struct VehicleRecord {
    pub id: u8,
    pub name: String,
    pub kind: VehicleKind,
    pub status_period_s: f64,
    pub cruise_speed_kn: f64,
    pub last_status: Option<StatusReport>,
    pub last_contact_ms: Option<u64>,
    pub asset_state: AssetState,
    pub position: Option<GeoPoint>,
    pub faults: Faults,
    pub phase: VehiclePhase,
    #[serde(skip)]
    battery_low: bool,
    #[serde(skip)]
    lost_notification: Option<u64>,
    #[serde(skip)]
    abort_notification: Option<u64>,
}

impl VehicleRecord {
    fn new(id: u8, name: String, kind: VehicleKind, status_period_s: f64, cruise_speed_kn: f64) -> Self {
        Self {
            id,
            name,
            kind,
            status_period_s,
            cruise_speed_kn,
            last_status: None,
            last_contact_ms: None,
            asset_state: AssetState::Undiscovered,
            position: None,
            faults: Faults::NONE,
            phase: VehiclePhase::Unknown,
            battery_low: false,
            lost_notification: None,
            abort_notification: None,
        }
    }

    /// Whole seconds since the last contact.
    pub fn last_heard_s(&self, now_ms: u64) -> Option<u64> {
        self.last_contact_ms.map(|t| now_ms.saturating_sub(t) / 1000)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveRecord {
    pub id: u8,
    pub name: String,
    pub kind: &'static str,
    pub state: ObjectiveState,
    pub assigned_vehicle: Option<u8>,
    /// Length of the objective's own waypoint path.
    pub length_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Info,
    Warning,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NotificationKind {
    Discovered,
    ObjectiveCompleted,
    FaultOnset { fault_bits: u8 },
    FaultCleared { fault_bits: u8 },
    Aborting { reason: u16 },
    MissionComplete,
    Recovered,
    BatteryLow { battery_pct: u8 },
    ContactLost,
    CommandAcked { cmd: CommandCode, status: u8 },
    CommandFailed { cmd: CommandCode, attempts: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Notification {
    pub id: u64,
    pub t_ms: u64,
    pub severity: Severity,
    pub pinned: bool,
    pub text: String,
    pub vehicle_id: Option<u8>,
    pub objective_id: Option<u8>,
    #[serde(flatten)]
    pub kind: NotificationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandState {
    AwaitingAck,
    Acked,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct PendingCommand {
    pub cmd_seq: u16,
    pub cmd: CommandCode,
    pub vehicle_id: u8,
    pub attempts: u8,
    pub next_retry_ms: u64,
    pub state: CommandState,
    pub issued_ms: u64,
    /// Ack status byte once acknowledged.
    pub ack_status: Option<u8>,
    /// An Ack turned up after the command had already failed.
    pub late_ack: bool,
    #[serde(skip)]
    frame: AcousticFrame,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoggedEvent {
    pub t_ms: u64,
    pub vehicle_id: u8,
    pub code: EventCode,
    pub objective_id: Option<u8>,
    pub detail: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum C2Error {
    #[error("unknown vehicle {0}")]
    UnknownVehicle(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveProgress {
    pub id: u8,
    pub name: String,
    pub state: ObjectiveState,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionProgress {
    pub objectives: Vec<ObjectiveProgress>,
    pub overall: f64,
}

#[derive(Debug)]
pub struct MissionDb {
    address: u8,
    plan: Option<MissionPlan>,
    vehicles: BTreeMap<u8, VehicleRecord>,
    objectives: BTreeMap<u8, ObjectiveRecord>,
    events: Vec<LoggedEvent>,
    notifications: Vec<Notification>,
    unpinned: Vec<u64>,
    pending_commands: BTreeMap<u16, PendingCommand>,
    decisions: Vec<AllocationDecision>,
    dedup: BTreeMap<u8, VecDeque<u16>>,
    pub(crate) chat_sessions: BTreeMap<String, DialogueContext>,
    next_cmd_seq: u16,
    undecodable: u64,
}

impl Default for MissionDb {
    fn default() -> Self {
        Self::new(C2_ADDRESS)
    }
}

impl MissionDb {
    pub fn new(address: u8) -> Self {
        Self {
            address,
            plan: None,
            vehicles: BTreeMap::new(),
            objectives: BTreeMap::new(),
            events: Vec::new(),
            notifications: Vec::new(),
            unpinned: Vec::new(),
            pending_commands: BTreeMap::new(),
            decisions: Vec::new(),
            dedup: BTreeMap::new(),
            chat_sessions: BTreeMap::new(),
            next_cmd_seq: 1,
            undecodable: 0,
        }
    }

    /// Posts the plan, the AUV fleet and the planner's initial decisions.
    pub fn load_mission(&mut self, plan: MissionPlan, fleet: &[VehicleSpec], decisions: Vec<AllocationDecision>) {
        for spec in fleet.iter().filter(|s| s.kind == VehicleKind::Auv) {
            self.add_vehicle(spec);
        }
        self.objectives = plan
            .objectives
            .iter()
            .map(|o| {
                let length_m = plan.objective_waypoints(o).map(|w| path_length(&w)).unwrap_or(0.0);
                let kind = match o.kind {
                    ObjectiveKind::Survey { .. } => "survey",
                    ObjectiveKind::Reacquire { .. } => "reacquire",
                };
                (
                    o.id,
                    ObjectiveRecord {
                        id: o.id,
                        name: o.name.clone(),
                        kind,
                        state: o.state,
                        assigned_vehicle: None,
                        length_m,
                    },
                )
            })
            .collect();
        for d in &decisions {
            if let Some(o) = self.objectives.get_mut(&d.objective_id) {
                o.assigned_vehicle = d.chosen_vehicle;
            }
        }
        self.decisions = decisions;
        self.plan = Some(plan);
    }

    pub fn add_vehicle(&mut self, spec: &VehicleSpec) {
        self.vehicles.entry(spec.id).or_insert_with(|| {
            VehicleRecord::new(spec.id, spec.name.clone(), spec.kind, spec.status_period_s, spec.cruise_speed_kn)
        });
    }

    pub fn address(&self) -> u8 {
        self.address
    }

    pub fn plan(&self) -> Option<&MissionPlan> {
        self.plan.as_ref()
    }

    pub fn vehicle(&self, id: u8) -> Option<&VehicleRecord> {
        self.vehicles.get(&id)
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleRecord> {
        self.vehicles.values()
    }

    pub fn objective(&self, id: u8) -> Option<&ObjectiveRecord> {
        self.objectives.get(&id)
    }

    pub fn objectives(&self) -> impl Iterator<Item = &ObjectiveRecord> {
        self.objectives.values()
    }

    pub fn events(&self) -> &[LoggedEvent] {
        &self.events
    }

    pub fn notifications(&self) -> &[Notification] {
        &self.notifications
    }

    pub fn pending_commands(&self) -> impl Iterator<Item = &PendingCommand> {
        self.pending_commands.values()
    }

    pub fn pending_command(&self, cmd_seq: u16) -> Option<&PendingCommand> {
        self.pending_commands.get(&cmd_seq)
    }

    pub fn decisions(&self) -> &[AllocationDecision] {
        &self.decisions
    }

    pub fn undecodable_count(&self) -> u64 {
        self.undecodable
    }

    pub fn dedup_len(&self, src: u8) -> usize {
        self.dedup.get(&src).map_or(0, |r| r.len())
    }

    /// Ids of notifications unpinned since the last call.
    pub fn drain_unpinned(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.unpinned)
    }

    fn notify(
        &mut self,
        t_ms: u64,
        severity: Severity,
        pinned: bool,
        kind: NotificationKind,
        vehicle_id: Option<u8>,
        objective_id: Option<u8>,
    ) -> Notification {
        debug_assert!(!pinned || severity >= Severity::Warning);
        let mut n = Notification {
            id: self.notifications.len() as u64 + 1,
            t_ms,
            severity,
            pinned,
            text: String::new(),
            vehicle_id,
            objective_id,
            kind,
        };
        n.text = dialogue::notification_to_text(&n);
        self.notifications.push(n.clone());
        n
    }

    fn unpin(&mut self, id: u64) {
        if let Some(n) = self.notifications.iter_mut().find(|n| n.id == id && n.pinned) {
            n.pinned = false;
            self.unpinned.push(id);
        }
    }

    /// Decodes and ingests raw frame bytes; undecodable input is only counted.
    pub fn ingest_bytes(&mut self, bytes: &[u8], now_ms: u64) -> Vec<Notification> {
        match decode_frame(bytes) {
            Ok(frame) => self.ingest_frame(&frame, now_ms),
            Err(_) => {
                self.undecodable += 1;
                Vec::new()
            }
        }
    }

    pub fn ingest_frame(&mut self, frame: &AcousticFrame, now_ms: u64) -> Vec<Notification> {
        if self.dedup.get(&frame.src).is_some_and(|ring| ring.contains(&frame.seq)) {
            return Vec::new();
        }
        let msg = match decode_payload(frame.msg_type, &frame.payload) {
            Ok(m) => m,
            Err(_) => {
                self.undecodable += 1;
                return Vec::new();
            }
        };
        if matches!(msg, TelemetryMessage::Command { .. }) || frame.src == self.address {
            return Vec::new();
        }
        let ring = self.dedup.entry(frame.src).or_default();
        if ring.len() == DEDUP_WINDOW {
            ring.pop_front();
        }
        ring.push_back(frame.seq);

        let mut out = Vec::new();
        let vid = frame.src;
        let rec = self.vehicles.entry(vid).or_insert_with(|| {
            VehicleRecord::new(vid, format!("Vehicle {vid}"), VehicleKind::Auv, DEFAULT_STATUS_PERIOD_S, 2.5)
        });
        let first_contact = rec.last_contact_ms.is_none();
        rec.last_contact_ms = Some(now_ms);
        rec.asset_state = AssetState::Online;
        if let Some(lost) = rec.lost_notification.take() {
            self.unpin(lost);
        }
        if first_contact {
            out.push(self.notify(now_ms, Severity::Info, false, NotificationKind::Discovered, Some(vid), None));
        }

        match msg {
            TelemetryMessage::Status(s) => out.extend(self.ingest_status(vid, s, now_ms)),
            TelemetryMessage::Event { event_code, objective_id, detail } => {
                out.extend(self.ingest_event(vid, event_code, objective_id, detail, now_ms))
            }
            TelemetryMessage::Ack { cmd_seq, status } => out.extend(self.ingest_ack(vid, cmd_seq, status, now_ms)),
            TelemetryMessage::Command { .. } => {}
        }
        out
    }

    fn ingest_status(&mut self, vid: u8, s: StatusReport, now_ms: u64) -> Vec<Notification> {
        let rec = self.vehicles.get_mut(&vid).expect("record created on contact");
        rec.last_status = Some(s);
        rec.position = Some(GeoPoint::new(s.lat(), s.lon()));
        rec.faults = Faults::from_bits(s.fault_bits);
        if rec.phase == VehiclePhase::Unknown && s.speed_cms > 0 {
            rec.phase = VehiclePhase::Underway;
        }
        let low = f64::from(s.battery_pct) < BATTERY_RESERVE_PCT;
        let crossed = low && !rec.battery_low;
        rec.battery_low = low;
        if s.objective_id != 0 {
            if let Some(o) = self.objectives.get_mut(&s.objective_id) {
                if o.state == ObjectiveState::Pending {
                    o.state = ObjectiveState::Active;
                    o.assigned_vehicle = Some(vid);
                }
            }
        }
        if crossed {
            let kind = NotificationKind::BatteryLow { battery_pct: s.battery_pct };
            vec![self.notify(now_ms, Severity::Warning, false, kind, Some(vid), None)]
        } else {
            Vec::new()
        }
    }

    fn ingest_event(&mut self, vid: u8, code: u8, objective_id: u8, detail: u16, now_ms: u64) -> Vec<Notification> {
        let Ok(code) = EventCode::try_from(code) else {
            self.undecodable += 1;
            return Vec::new();
        };
        let oid = (objective_id != 0).then_some(objective_id);
        self.events.push(LoggedEvent { t_ms: now_ms, vehicle_id: vid, code, objective_id: oid, detail });
        let mut out = Vec::new();
        match code {
            EventCode::ObjectiveStarted => {
                if let Some(o) = oid.and_then(|id| self.objectives.get_mut(&id)) {
                    o.state = ObjectiveState::Active;
                    o.assigned_vehicle = Some(vid);
                }
                self.set_phase(vid, VehiclePhase::Underway);
            }
            EventCode::ObjectiveCompleted => {
                if let Some(o) = oid.and_then(|id| self.objectives.get_mut(&id)) {
                    o.state = ObjectiveState::Complete;
                }
                out.push(self.notify(
                    now_ms,
                    Severity::Info,
                    false,
                    NotificationKind::ObjectiveCompleted,
                    Some(vid),
                    oid,
                ));
            }
            EventCode::FaultOnset => {
                let bits = detail as u8;
                if let Some(r) = self.vehicles.get_mut(&vid) {
                    r.faults.insert(Faults::from_bits(bits));
                }
                let kind = NotificationKind::FaultOnset { fault_bits: bits };
                out.push(self.notify(now_ms, Severity::Critical, true, kind, Some(vid), None));
            }
            EventCode::FaultCleared => {
                let bits = detail as u8;
                if let Some(r) = self.vehicles.get_mut(&vid) {
                    r.faults.remove(Faults::from_bits(bits));
                }
                let to_unpin: Vec<u64> = self
                    .notifications
                    .iter()
                    .filter(|n| {
                        n.pinned
                            && n.vehicle_id == Some(vid)
                            && matches!(n.kind, NotificationKind::FaultOnset { fault_bits } if fault_bits & bits != 0)
                    })
                    .map(|n| n.id)
                    .collect();
                for id in to_unpin {
                    self.unpin(id);
                }
                let kind = NotificationKind::FaultCleared { fault_bits: bits };
                out.push(self.notify(now_ms, Severity::Info, false, kind, Some(vid), None));
            }
            EventCode::Aborting => {
                self.set_phase(vid, VehiclePhase::Aborting);
                let kind = NotificationKind::Aborting { reason: detail };
                let n = self.notify(now_ms, Severity::Warning, true, kind, Some(vid), None);
                if let Some(r) = self.vehicles.get_mut(&vid) {
                    r.abort_notification = Some(n.id);
                }
                out.push(n);
                self.replan_after_abort(vid, detail, now_ms);
            }
            EventCode::MissionComplete => {
                out.push(self.notify(
                    now_ms,
                    Severity::Info,
                    false,
                    NotificationKind::MissionComplete,
                    Some(vid),
                    None,
                ));
            }
            EventCode::Recovered => {
                self.set_phase(vid, VehiclePhase::Recovered);
                if let Some(id) = self.vehicles.get_mut(&vid).and_then(|r| r.abort_notification.take()) {
                    self.unpin(id);
                }
                out.push(self.notify(now_ms, Severity::Info, false, NotificationKind::Recovered, Some(vid), None));
            }
        }
        out
    }

    fn set_phase(&mut self, vid: u8, phase: VehiclePhase) {
        if let Some(r) = self.vehicles.get_mut(&vid) {
            r.phase = phase;
        }
    }

    /// Mirrors the vehicles' replanning so explanations cover the new
    /// assignment. Uses the C2's own view: last reported faults, battery and
    /// position.
    fn replan_after_abort(&mut self, vid: u8, reason: u16, now_ms: u64) {
        let Some(plan) = self.plan.as_ref() else { return };
        let unfinished: Vec<u8> = self
            .objectives
            .values()
            .filter(|o| o.assigned_vehicle == Some(vid) && o.state != ObjectiveState::Complete)
            .map(|o| o.id)
            .collect();
        if unfinished.is_empty() {
            return;
        }
        let candidates: Vec<Candidate> = self
            .vehicles
            .values()
            .filter(|r| r.kind == VehicleKind::Auv)
            .filter(|r| {
                if r.id == vid {
                    reason != ABORT_REASON_OPERATOR
                } else {
                    !matches!(r.phase, VehiclePhase::Aborting | VehiclePhase::Recovered)
                }
            })
            .map(|r| Candidate {
                id: r.id,
                kind: r.kind,
                faults: r.faults,
                battery_pct: r.last_status.map_or(100.0, |s| f64::from(s.battery_pct)),
                route_end: r
                    .position
                    .and_then(|p| plan.to_enu(p).ok())
                    .or_else(|| plan.to_enu(plan.launch).ok())
                    .unwrap_or_default(),
            })
            .collect();
        let Ok((alloc, decisions)) = allocate_objectives(plan, &candidates, &unfinished, now_ms as f64 / 1000.0) else {
            return;
        };
        for oid in &unfinished {
            if let Some(o) = self.objectives.get_mut(oid) {
                o.state = ObjectiveState::Pending;
                o.assigned_vehicle = alloc.get(oid).copied();
            }
        }
        self.decisions.extend(decisions);
    }

    fn ingest_ack(&mut self, vid: u8, cmd_seq: u16, status: u8, now_ms: u64) -> Vec<Notification> {
        let Some(p) = self.pending_commands.get_mut(&cmd_seq).filter(|p| p.vehicle_id == vid) else {
            return Vec::new();
        };
        match p.state {
            CommandState::AwaitingAck => {
                p.state = CommandState::Acked;
                p.ack_status = Some(status);
                let kind = NotificationKind::CommandAcked { cmd: p.cmd, status };
                let severity = if status == 0 { Severity::Info } else { Severity::Warning };
                vec![self.notify(now_ms, severity, false, kind, Some(vid), None)]
            }
            CommandState::Failed => {
                p.late_ack = true;
                Vec::new()
            }
            CommandState::Acked => Vec::new(),
        }
    }

    /// Re-derives every vehicle's liveness at `now_ms`.
    pub fn refresh_asset_states(&mut self, now_ms: u64) -> Vec<Notification> {
        let mut lost = Vec::new();
        for r in self.vehicles.values_mut() {
            let next = asset_state_for(r.last_contact_ms, now_ms, r.status_period_s);
            if next == AssetState::Lost && r.asset_state != AssetState::Lost {
                lost.push(r.id);
            }
            r.asset_state = next;
        }
        let mut out = Vec::new();
        for vid in lost {
            let n = self.notify(now_ms, Severity::Warning, true, NotificationKind::ContactLost, Some(vid), None);
            self.vehicles.get_mut(&vid).expect("known id").lost_notification = Some(n.id);
            out.push(n);
        }
        out
    }

    /// Builds a command frame and starts tracking it for acknowledgement.
    pub fn issue_command(
        &mut self,
        vehicle_id: u8,
        cmd: CommandCode,
        now_ms: u64,
    ) -> Result<(AcousticFrame, u16), C2Error> {
        if !self.vehicles.contains_key(&vehicle_id) {
            return Err(C2Error::UnknownVehicle(vehicle_id));
        }
        let cmd_seq = self.fresh_seq();
        let (msg_type, payload) = encode_payload(&TelemetryMessage::command(cmd));
        let frame = AcousticFrame { src: self.address, dst: vehicle_id, msg_type, seq: cmd_seq, payload };
        self.pending_commands.insert(
            cmd_seq,
            PendingCommand {
                cmd_seq,
                cmd,
                vehicle_id,
                attempts: 1,
                next_retry_ms: now_ms + COMMAND_RETRY_MS,
                state: CommandState::AwaitingAck,
                issued_ms: now_ms,
                ack_status: None,
                late_ack: false,
                frame: frame.clone(),
            },
        );
        Ok((frame, cmd_seq))
    }

    fn fresh_seq(&mut self) -> u16 {
        loop {
            let seq = self.next_cmd_seq;
            self.next_cmd_seq = self.next_cmd_seq.wrapping_add(1);
            let busy = self.pending_commands.get(&seq).is_some_and(|p| p.state == CommandState::AwaitingAck);
            if !busy {
                return seq;
            }
        }
    }

    /// Out-of-cycle status request.
    pub fn request_status(&mut self, vehicle_id: u8, now_ms: u64) -> Result<AcousticFrame, C2Error> {
        self.issue_command(vehicle_id, CommandCode::Ping, now_ms).map(|(f, _)| f)
    }

    /// Fires due retry timers: frames to re-send plus failure notifications.
    pub fn poll_retries(&mut self, now_ms: u64) -> (Vec<AcousticFrame>, Vec<Notification>) {
        let mut resend = Vec::new();
        let mut failed = Vec::new();
        for p in self.pending_commands.values_mut() {
            if p.state != CommandState::AwaitingAck || p.next_retry_ms > now_ms {
                continue;
            }
            if p.attempts < MAX_COMMAND_ATTEMPTS {
                p.attempts += 1;
                p.next_retry_ms = now_ms + COMMAND_RETRY_MS;
                resend.push(p.frame.clone());
            } else {
                p.state = CommandState::Failed;
                failed.push((p.vehicle_id, p.cmd, p.attempts));
            }
        }
        let notes = failed
            .into_iter()
            .map(|(vid, cmd, attempts)| {
                let kind = NotificationKind::CommandFailed { cmd, attempts };
                self.notify(now_ms, Severity::Critical, true, kind, Some(vid), None)
            })
            .collect();
        (resend, notes)
    }

    pub fn mission_progress(&self) -> MissionProgress {
        let objectives: Vec<ObjectiveProgress> = self
            .objectives
            .values()
            .map(|o| {
                let fraction = match o.state {
                    ObjectiveState::Complete => 1.0,
                    ObjectiveState::Active => self
                        .vehicles
                        .values()
                        .filter_map(|r| r.last_status)
                        .find(|s| s.objective_id == o.id)
                        .map_or(0.0, |s| f64::from(s.objective_pct.min(100)) / 100.0),
                    ObjectiveState::Pending | ObjectiveState::Aborted => 0.0,
                };
                ObjectiveProgress { id: o.id, name: o.name.clone(), state: o.state, fraction }
            })
            .collect();
        let overall = if objectives.is_empty() {
            0.0
        } else {
            objectives.iter().map(|o| o.fraction).sum::<f64>() / objectives.len() as f64
        };
        MissionProgress { objectives, overall }
    }

    /// Seconds until the vehicle should reach recovery, from its last reported
    /// position through its unfinished objectives at cruise speed.
    pub fn estimate_eta(&self, vehicle_id: u8) -> Option<f64> {
        let plan = self.plan.as_ref()?;
        let r = self.vehicles.get(&vehicle_id)?;
        if matches!(r.phase, VehiclePhase::Unknown | VehiclePhase::Recovered) {
            return None;
        }
        let status = r.last_status?;
        let pos = plan.to_enu(r.position?).ok()?;
        let recovery = plan.to_enu(plan.recovery).ok()?;
        let speed = r.cruise_speed_kn * KNOT_MPS;
        if r.phase == VehiclePhase::Aborting {
            return Some(pos.distance(&recovery) / speed);
        }
        let active = (status.objective_id != 0).then_some(status.objective_id);
        let rest: Vec<u8> = self
            .objectives
            .values()
            .filter(|o| o.assigned_vehicle == Some(vehicle_id) && o.state != ObjectiveState::Complete)
            .filter(|o| Some(o.id) != active)
            .map(|o| o.id)
            .collect();
        let mut distance = 0.0;
        let mut start = pos;
        if let Some(oid) = active {
            let o = plan.objective(oid)?;
            let wps = plan.objective_waypoints(o).ok()?;
            let len = path_length(&wps);
            distance += len * (1.0 - f64::from(status.objective_pct.min(100)) / 100.0);
            start = *wps.last()?;
        }
        distance += Route::plan(plan, start, &rest, recovery)
            .map(|r| r.track.length())
            .unwrap_or_else(|_| start.distance(&recovery));
        Some(distance / speed)
    }
}
