use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::alloc::{rehearsal_route, Route};
use super::{
    allocate_objectives, Allocation, AllocationDecision, Candidate, FaultAction, FaultSchedule, Faults, Mode, SimEvent,
    SimEventKind, VehicleKind, VehicleSpec, VehicleState,
};
use crate::acoustic::{
    encode_payload, to_e7, AcousticFrame, CommandCode, EventCode, StatusReport, TelemetryMessage, BROADCAST, KNOT_MPS,
    MSG_COMMAND,
};
use crate::domain::{
    path_length, validate_plan, DomainError, EnuPoint, GeoPoint, MissionPlan, ObjectiveKind, ObjectiveState, Track,
    Violation,
};

pub const DEFAULT_TICK_MS: u64 = 500;
pub const CAPTURE_RADIUS_M: f64 = 5.0;
pub const ABORT_BATTERY_PCT: f64 = 10.0;
pub const DEFAULT_RF_RANGE_M: f64 = 2000.0;
const BATTERY_LOW_PCT: f64 = 20.0;
const SURVEY_DEPTH_M: f64 = 2.0;

const ABORT_REASON_FAULT: u16 = 1;
const ABORT_REASON_BATTERY: u16 = 2;
const ABORT_REASON_OPERATOR: u16 = 3;

const ACK_OK: u8 = 0;
const ACK_REJECTED: u8 = 1;
const ACK_UNKNOWN: u8 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("tick of {0} ms outside [1, 10000]")]
    DtOutOfRange(u64),
    #[error("unknown vehicle {0}")]
    UnknownVehicle(u8),
    #[error("duplicate vehicle id {0}")]
    DuplicateVehicle(u8),
    #[error("scenario needs at least one AUV")]
    NoAuv,
    #[error("invalid mission plan: {0:?}")]
    InvalidPlan(Vec<Violation>),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldOptions {
    /// Scales both battery load coefficients (adverse conditions).
    pub drain_multiplier: f64,
    /// Maximum distance the relay vehicle strays from the shore station.
    pub rf_range_m: f64,
}

impl Default for WorldOptions {
    fn default() -> Self {
        Self { drain_multiplier: 1.0, rf_range_m: DEFAULT_RF_RANGE_M }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub spec: VehicleSpec,
    pub state: VehicleState,
    tags: Vec<Option<u8>>,
    last_emitted_pos: Option<EnuPoint>,
    battery_low_reported: bool,
}

impl Vehicle {
    pub fn last_emitted_pos(&self) -> Option<EnuPoint> {
        self.last_emitted_pos
    }

    pub fn route_tags(&self) -> &[Option<u8>] {
        &self.tags
    }

    fn set_route(&mut self, route: Route, index: usize) {
        self.state.track = route.track;
        self.tags = route.tags;
        self.state.track_index = index;
    }

    fn next_seq(&mut self) -> u16 {
        let seq = self.state.seq_counter;
        self.state.seq_counter = seq.wrapping_add(1);
        seq
    }

    /// Last objective waypoint still ahead on the track, else the position.
    fn route_end(&self) -> EnuPoint {
        let idx = self.state.track_index;
        (idx..self.tags.len())
            .rev()
            .find(|&i| self.tags[i].is_some())
            .map(|i| self.state.track.waypoints[i])
            .unwrap_or(self.state.pos)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub events: Vec<SimEvent>,
    pub frames: Vec<AcousticFrame>,
}

#[derive(Debug, Clone)]
pub struct World {
    clock_ms: u64,
    vehicles: BTreeMap<u8, Vehicle>,
    plan: MissionPlan,
    allocation: Allocation,
    allocations: Vec<AllocationDecision>,
    fault_schedule: FaultSchedule,
    next_fault: usize,
    rng_seed: u64,
    outbox: Vec<AcousticFrame>,
    options: WorldOptions,
    mission_complete: bool,
    shore: EnuPoint,
    recovery: EnuPoint,
}

/// Midpoint between shore and AUV, pulled back to within `rf_range_m` of shore.
pub fn station_keeping_target(shore: EnuPoint, auv: EnuPoint, rf_range_m: f64) -> EnuPoint {
    let mid = shore.midpoint(&auv);
    let d = shore.distance(&mid);
    if d <= rf_range_m {
        return mid;
    }
    let scale = rf_range_m / d;
    EnuPoint::new(shore.x + (mid.x - shore.x) * scale, shore.y + (mid.y - shore.y) * scale)
}

fn move_toward(from: EnuPoint, to: EnuPoint, dist: f64) -> EnuPoint {
    let d = from.distance(&to);
    if d <= dist || d == 0.0 {
        return to;
    }
    let f = dist / d;
    EnuPoint::new(from.x + (to.x - from.x) * f, from.y + (to.y - from.y) * f)
}

impl World {
    pub fn new(
        plan: MissionPlan,
        vehicles: Vec<(VehicleSpec, GeoPoint)>,
        fault_schedule: FaultSchedule,
        rng_seed: u64,
        options: WorldOptions,
    ) -> Result<World, SimError> {
        let violations = validate_plan(&plan);
        if !violations.is_empty() {
            return Err(SimError::InvalidPlan(violations));
        }
        let launch = plan.to_enu(plan.launch)?;
        let recovery = plan.to_enu(plan.recovery)?;
        let shore = plan.to_enu(plan.shore_station)?;

        let mut map = BTreeMap::new();
        for (spec, start) in vehicles {
            let pos = plan.to_enu(start)?;
            let placeholder = Track { waypoints: vec![pos, launch] };
            let state = VehicleState {
                pos,
                depth_m: 0.0,
                heading_deg: 0.0,
                speed_kn: 0.0,
                battery_pct: 100.0,
                faults: Faults::NONE,
                mode: Mode::Idle,
                current_objective: None,
                track: placeholder,
                track_index: 0,
                seq_counter: 0,
            };
            let id = spec.id;
            let vehicle =
                Vehicle { spec, state, tags: vec![None, None], last_emitted_pos: None, battery_low_reported: false };
            if map.insert(id, vehicle).is_some() {
                return Err(SimError::DuplicateVehicle(id));
            }
        }
        if !map.values().any(|v| v.spec.kind == VehicleKind::Auv) {
            return Err(SimError::NoAuv);
        }

        let candidates: Vec<Candidate> = map
            .values()
            .map(|v| Candidate {
                id: v.spec.id,
                kind: v.spec.kind,
                faults: v.state.faults,
                battery_pct: v.state.battery_pct,
                route_end: v.state.pos,
            })
            .collect();
        let ids: Vec<u8> = plan.objectives.iter().map(|o| o.id).collect();
        let (allocation, decisions) = allocate_objectives(&plan, &candidates, &ids, 0.0)?;

        for v in map.values_mut() {
            match v.spec.kind {
                VehicleKind::Auv => {
                    let route = rehearsal_route(&plan, &allocation, v.spec.id)?;
                    v.set_route(route, 0);
                }
                VehicleKind::RelayUsv => {
                    v.tags = vec![None; v.state.track.waypoints.len()];
                }
            }
        }

        Ok(World {
            clock_ms: 0,
            vehicles: map,
            plan,
            allocation,
            allocations: decisions,
            fault_schedule,
            next_fault: 0,
            rng_seed,
            outbox: Vec::new(),
            options,
            mission_complete: false,
            shore,
            recovery,
        })
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn plan(&self) -> &MissionPlan {
        &self.plan
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.values()
    }

    pub fn vehicle(&self, id: u8) -> Option<&Vehicle> {
        self.vehicles.get(&id)
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn allocations(&self) -> &[AllocationDecision] {
        &self.allocations
    }

    pub fn mission_complete(&self) -> bool {
        self.mission_complete
    }

    pub fn shore_enu(&self) -> EnuPoint {
        self.shore
    }

    /// Replaces a vehicle's route with an untagged track and sets it underway.
    pub fn override_track(&mut self, vehicle_id: u8, track: Track) -> Result<(), SimError> {
        let v = self.vehicles.get_mut(&vehicle_id).ok_or(SimError::UnknownVehicle(vehicle_id))?;
        let n = track.waypoints.len();
        v.set_route(Route { track, tags: vec![None; n] }, 0);
        v.state.mode = Mode::Transit;
        v.state.current_objective = None;
        Ok(())
    }

    /// Remaining track length divided by cruise speed; `None` when idle or recovered.
    pub fn estimate_eta(&self, vehicle_id: u8) -> Option<f64> {
        let v = self.vehicles.get(&vehicle_id)?;
        if matches!(v.state.mode, Mode::Idle | Mode::Recovered) {
            return None;
        }
        let wps = &v.state.track.waypoints;
        let idx = v.state.track_index.min(wps.len());
        let remaining = if idx < wps.len() { v.state.pos.distance(&wps[idx]) + path_length(&wps[idx..]) } else { 0.0 };
        Some(remaining / (v.spec.cruise_speed_kn * KNOT_MPS))
    }

    /// Station-keeping goal for the relay vehicle, once any AUV has reported.
    pub fn relay_station_keeping(&self, relay_id: u8) -> Option<EnuPoint> {
        self.vehicles.get(&relay_id)?;
        let auv =
            self.vehicles.values().filter(|v| v.spec.kind == VehicleKind::Auv).find_map(|v| v.last_emitted_pos)?;
        Some(station_keeping_target(self.shore, auv, self.options.rf_range_m))
    }

    pub fn step(&mut self, dt_ms: u64) -> Result<StepOutput, SimError> {
        if !(1..=10_000).contains(&dt_ms) {
            return Err(SimError::DtOutOfRange(dt_ms));
        }
        let prev = self.clock_ms;
        self.clock_ms += dt_ms;
        let mut events = Vec::new();

        self.apply_faults(&mut events);
        let ids: Vec<u8> = self.vehicles.keys().copied().collect();
        for &id in &ids {
            self.advance(id, dt_ms, &mut events)?;
        }
        for &id in &ids {
            let v = &self.vehicles[&id];
            if v.spec.kind != VehicleKind::Auv
                || !matches!(v.state.mode, Mode::Transit | Mode::Survey | Mode::Reacquire)
            {
                continue;
            }
            if v.state.faults.is_blocking() {
                self.abort(id, ABORT_REASON_FAULT, &mut events)?;
            } else if v.state.battery_pct <= ABORT_BATTERY_PCT {
                self.abort(id, ABORT_REASON_BATTERY, &mut events)?;
            }
        }
        for &id in &ids {
            let v = &self.vehicles[&id];
            if v.spec.kind != VehicleKind::Auv {
                continue;
            }
            let period = (v.spec.status_period_s * 1000.0).round().max(1.0) as u64;
            if self.clock_ms / period > prev / period {
                self.queue_status(id);
            }
        }
        Ok(StepOutput { events, frames: std::mem::take(&mut self.outbox) })
    }

    /// Hands a frame heard by `vehicle_id`'s modem to the vehicle.
    pub fn receive_frame(&mut self, vehicle_id: u8, frame: &AcousticFrame) -> Result<StepOutput, SimError> {
        let v = self.vehicles.get(&vehicle_id).ok_or(SimError::UnknownVehicle(vehicle_id))?;
        let mut events = Vec::new();
        if v.spec.kind != VehicleKind::Auv
            || v.state.faults.contains(Faults::COMMS)
            || frame.msg_type != MSG_COMMAND
            || !frame.is_for(vehicle_id)
        {
            return Ok(StepOutput::default());
        }
        let Ok(TelemetryMessage::Command { cmd_code, .. }) =
            crate::acoustic::decode_payload(frame.msg_type, &frame.payload)
        else {
            return Ok(StepOutput::default());
        };
        let mode = v.state.mode;
        let mut ping = false;
        let status = match CommandCode::try_from(cmd_code) {
            Ok(CommandCode::StartMission) => match mode {
                Mode::Idle => {
                    let v = self.vehicles.get_mut(&vehicle_id).expect("checked");
                    v.state.mode = Mode::Transit;
                    ACK_OK
                }
                Mode::Recovered => ACK_REJECTED,
                _ => ACK_OK,
            },
            Ok(CommandCode::AbortToRecovery) => {
                if !matches!(mode, Mode::AbortToRecovery | Mode::Recovered) {
                    self.abort(vehicle_id, ABORT_REASON_OPERATOR, &mut events)?;
                }
                ACK_OK
            }
            Ok(CommandCode::Ping) => {
                ping = true;
                ACK_OK
            }
            Err(_) => ACK_UNKNOWN,
        };
        self.queue_message(vehicle_id, &TelemetryMessage::Ack { cmd_seq: frame.seq, status });
        if ping {
            self.queue_status(vehicle_id);
        }
        Ok(StepOutput { events, frames: std::mem::take(&mut self.outbox) })
    }

    fn apply_faults(&mut self, events: &mut Vec<SimEvent>) {
        while let Some(entry) = self.fault_schedule.entries.get(self.next_fault) {
            if (entry.t_s * 1000.0).round() as u64 > self.clock_ms {
                break;
            }
            let entry = entry.clone();
            self.next_fault += 1;
            let Some(v) = self.vehicles.get_mut(&entry.vehicle_id) else { continue };
            let bit = entry.fault.bit();
            match entry.action {
                FaultAction::Set if !v.state.faults.contains(bit) => {
                    v.state.faults.insert(bit);
                    let detail = format!("{} fault", entry.fault.name());
                    self.emit(events, SimEventKind::FaultOnset, entry.vehicle_id, None, detail, u16::from(bit.bits()));
                }
                FaultAction::Clear if v.state.faults.contains(bit) => {
                    v.state.faults.remove(bit);
                    let detail = format!("{} fault cleared", entry.fault.name());
                    self.emit(
                        events,
                        SimEventKind::FaultCleared,
                        entry.vehicle_id,
                        None,
                        detail,
                        u16::from(bit.bits()),
                    );
                }
                _ => {}
            }
        }
    }

    fn advance(&mut self, id: u8, dt_ms: u64, events: &mut Vec<SimEvent>) -> Result<(), SimError> {
        let dt_s = dt_ms as f64 / 1000.0;
        let relay_target = match self.vehicles[&id].spec.kind {
            VehicleKind::RelayUsv => self.relay_station_keeping(id),
            VehicleKind::Auv => None,
        };
        let drain_multiplier = self.options.drain_multiplier;
        let v = self.vehicles.get_mut(&id).expect("known id");
        let mut captured = Vec::new();

        match v.spec.kind {
            VehicleKind::RelayUsv => {
                let target = relay_target.unwrap_or(v.state.pos);
                let d = v.state.pos.distance(&target);
                if d > CAPTURE_RADIUS_M && v.state.battery_pct > 0.0 {
                    v.state.speed_kn = v.spec.cruise_speed_kn;
                    v.state.heading_deg = v.state.pos.bearing_to(&target);
                    v.state.pos = move_toward(v.state.pos, target, v.state.speed_kn * KNOT_MPS * dt_s);
                } else {
                    v.state.speed_kn = 0.0;
                }
            }
            VehicleKind::Auv => {
                let underway = v.state.mode.is_underway() && v.state.battery_pct > 0.0;
                v.state.speed_kn = if underway { v.spec.cruise_speed_kn } else { 0.0 };
                if underway {
                    let mut budget = v.state.speed_kn * KNOT_MPS * dt_s;
                    let wps = &v.state.track.waypoints;
                    while v.state.track_index < wps.len() {
                        let target = wps[v.state.track_index];
                        let d = v.state.pos.distance(&target);
                        if d <= CAPTURE_RADIUS_M {
                            captured.push(v.state.track_index);
                            v.state.track_index += 1;
                            continue;
                        }
                        if budget <= 0.0 {
                            break;
                        }
                        v.state.heading_deg = v.state.pos.bearing_to(&target);
                        if budget >= d {
                            v.state.pos = target;
                            budget -= d;
                            captured.push(v.state.track_index);
                            v.state.track_index += 1;
                        } else {
                            v.state.pos = move_toward(v.state.pos, target, budget);
                            budget = 0.0;
                        }
                    }
                }
            }
        }

        let drain = v.spec.drain_pct_per_h(v.state.speed_kn) * drain_multiplier * dt_s / 3600.0;
        v.state.battery_pct = (v.state.battery_pct - drain).clamp(0.0, 100.0);
        let low = v.state.battery_pct <= BATTERY_LOW_PCT && !v.battery_low_reported;
        if low {
            v.battery_low_reported = true;
        }
        let battery = v.state.battery_pct;
        let is_auv = v.spec.kind == VehicleKind::Auv;

        for idx in captured {
            self.on_capture(id, idx, events);
        }
        if low && is_auv {
            self.emit(events, SimEventKind::BatteryLow, id, None, format!("battery at {battery:.1}%"), 0);
        }
        if let Some(v) = self.vehicles.get_mut(&id) {
            v.state.depth_m = if v.state.mode == Mode::Survey { SURVEY_DEPTH_M } else { 0.0 };
        }
        Ok(())
    }

    fn on_capture(&mut self, id: u8, idx: usize, events: &mut Vec<SimEvent>) {
        let v = &self.vehicles[&id];
        let len = v.tags.len();
        let tag = v.tags[idx];
        if let Some(oid) = tag {
            let starts = idx == 0 || v.tags[idx - 1] != Some(oid);
            let ends = idx + 1 == len || v.tags[idx + 1] != Some(oid);
            let is_survey = matches!(self.plan.objective(oid).map(|o| &o.kind), Some(ObjectiveKind::Survey { .. }));
            if starts {
                if let Some(o) = self.plan.objective_mut(oid) {
                    o.state = ObjectiveState::Active;
                }
                let v = self.vehicles.get_mut(&id).expect("known id");
                v.state.current_objective = Some(oid);
                v.state.mode = if is_survey { Mode::Survey } else { Mode::Reacquire };
                self.emit(events, SimEventKind::ObjectiveStarted, id, Some(oid), "objective started".into(), 0);
            }
            if ends {
                if let Some(o) = self.plan.objective_mut(oid) {
                    o.state = ObjectiveState::Complete;
                }
                let v = self.vehicles.get_mut(&id).expect("known id");
                v.state.current_objective = None;
                v.state.mode = Mode::Transit;
                self.emit(events, SimEventKind::ObjectiveCompleted, id, Some(oid), "objective complete".into(), 0);
            }
        }
        if idx + 1 == len {
            self.arrive_at_recovery(id, events);
        }
    }

    fn arrive_at_recovery(&mut self, id: u8, events: &mut Vec<SimEvent>) {
        let v = self.vehicles.get_mut(&id).expect("known id");
        v.state.mode = Mode::Recovered;
        v.state.speed_kn = 0.0;
        v.state.depth_m = 0.0;
        v.state.current_objective = None;
        let all_done = self.plan.objectives.iter().all(|o| o.state == ObjectiveState::Complete);
        if all_done && !self.mission_complete {
            self.mission_complete = true;
            self.emit(events, SimEventKind::MissionComplete, id, None, "all objectives complete".into(), 0);
        }
        self.emit(events, SimEventKind::Recovered, id, None, "at recovery point".into(), 0);
    }

    fn abort(&mut self, id: u8, reason: u16, events: &mut Vec<SimEvent>) -> Result<(), SimError> {
        let recovery = self.recovery;
        let v = self.vehicles.get_mut(&id).ok_or(SimError::UnknownVehicle(id))?;
        v.state.mode = Mode::AbortToRecovery;
        v.state.current_objective = None;
        v.state.depth_m = 0.0;
        let pos = v.state.pos;
        let reason_text = match reason {
            ABORT_REASON_FAULT => "blocking fault",
            ABORT_REASON_BATTERY => "low battery",
            _ => "operator command",
        };
        self.emit(events, SimEventKind::AbortStarted, id, None, format!("aborting to recovery: {reason_text}"), reason);

        let unfinished: Vec<u8> = self
            .allocation
            .iter()
            .filter(|(oid, vid)| {
                **vid == id && self.plan.objective(**oid).is_some_and(|o| o.state != ObjectiveState::Complete)
            })
            .map(|(oid, _)| *oid)
            .collect();

        if pos.distance(&recovery) <= CAPTURE_RADIUS_M {
            let v = self.vehicles.get_mut(&id).expect("known id");
            v.state.pos = recovery;
            self.arrive_at_recovery(id, events);
        } else {
            let route = Route::from_tagged(vec![(pos, None), (recovery, None)])?;
            self.vehicles.get_mut(&id).expect("known id").set_route(route, 1);
        }

        if !unfinished.is_empty() {
            // A vehicle aborting on its own fault or battery stays in the trace
            // (where it shows as ineligible); an operator abort removes it.
            let keep = (reason != ABORT_REASON_OPERATOR).then_some(id);
            self.replan(id, keep, &unfinished, events)?;
        }
        Ok(())
    }

    fn replan(
        &mut self,
        from: u8,
        keep: Option<u8>,
        objectives: &[u8],
        events: &mut Vec<SimEvent>,
    ) -> Result<(), SimError> {
        for oid in objectives {
            self.allocation.remove(oid);
            if let Some(o) = self.plan.objective_mut(*oid) {
                o.state = ObjectiveState::Pending;
            }
        }
        let candidates: Vec<Candidate> = self
            .vehicles
            .values()
            .filter(|v| {
                v.spec.kind == VehicleKind::Auv
                    && (Some(v.spec.id) == keep || !matches!(v.state.mode, Mode::AbortToRecovery | Mode::Recovered))
            })
            .map(|v| Candidate {
                id: v.spec.id,
                kind: v.spec.kind,
                faults: v.state.faults,
                battery_pct: v.state.battery_pct,
                route_end: v.route_end(),
            })
            .collect();
        let now_s = self.clock_ms as f64 / 1000.0;
        let (alloc, decisions) = allocate_objectives(&self.plan, &candidates, objectives, now_s)?;
        self.allocations.extend(decisions);

        let receivers: BTreeSet<u8> = alloc.values().copied().collect();
        let mut parts = Vec::new();
        for oid in objectives {
            match alloc.get(oid) {
                Some(v) => parts.push(format!("objective {oid} -> vehicle {v}")),
                None => parts.push(format!("objective {oid} unassigned")),
            }
        }
        self.allocation.extend(alloc);
        for r in receivers {
            self.reroute(r)?;
        }
        self.emit(events, SimEventKind::Replanned, from, None, parts.join("; "), 0);
        Ok(())
    }

    /// Rebuilds a vehicle's route after new objectives were assigned to it.
    fn reroute(&mut self, id: u8) -> Result<(), SimError> {
        let v = &self.vehicles[&id];
        if v.state.mode == Mode::Idle {
            let route = rehearsal_route(&self.plan, &self.allocation, id)?;
            self.vehicles.get_mut(&id).expect("known id").set_route(route, 0);
            return Ok(());
        }
        let current = v.state.current_objective;
        let mut prefix = vec![(v.state.pos, current)];
        if let Some(oid) = current {
            for i in v.state.track_index..v.tags.len() {
                if v.tags[i] == Some(oid) {
                    prefix.push((v.state.track.waypoints[i], Some(oid)));
                }
            }
        }
        let cursor = prefix.last().map(|p| p.0).unwrap_or(v.state.pos);
        let rest: Vec<u8> = self
            .allocation
            .iter()
            .filter(|(oid, vid)| {
                **vid == id
                    && Some(**oid) != current
                    && self.plan.objective(**oid).is_some_and(|o| o.state != ObjectiveState::Complete)
            })
            .map(|(oid, _)| *oid)
            .collect();
        let tail = Route::plan(&self.plan, cursor, &rest, self.recovery)?;
        let mut points = prefix;
        points.extend(tail.track.waypoints.into_iter().zip(tail.tags).skip(1));
        let route = Route::from_tagged(points)?;
        let v = self.vehicles.get_mut(&id).expect("known id");
        if v.state.mode == Mode::Recovered {
            v.state.mode = Mode::Transit;
        }
        v.set_route(route, 1);
        Ok(())
    }

    fn emit(
        &mut self,
        events: &mut Vec<SimEvent>,
        kind: SimEventKind,
        vehicle_id: u8,
        objective_id: Option<u8>,
        detail: String,
        code_detail: u16,
    ) {
        events.push(SimEvent { t_ms: self.clock_ms, kind, vehicle_id, objective_id, detail });
        let code = match kind {
            SimEventKind::ObjectiveStarted => EventCode::ObjectiveStarted,
            SimEventKind::ObjectiveCompleted => EventCode::ObjectiveCompleted,
            SimEventKind::FaultOnset => EventCode::FaultOnset,
            SimEventKind::FaultCleared => EventCode::FaultCleared,
            SimEventKind::AbortStarted => EventCode::Aborting,
            SimEventKind::MissionComplete => EventCode::MissionComplete,
            SimEventKind::Recovered => EventCode::Recovered,
            SimEventKind::BatteryLow | SimEventKind::Replanned => return,
        };
        if self.vehicles.get(&vehicle_id).is_some_and(|v| v.spec.kind == VehicleKind::Auv) {
            self.queue_message(vehicle_id, &TelemetryMessage::event(code, objective_id.unwrap_or(0), code_detail));
        }
    }

    fn queue_message(&mut self, id: u8, msg: &TelemetryMessage) {
        let Some(v) = self.vehicles.get_mut(&id) else { return };
        if v.state.faults.contains(Faults::COMMS) {
            return;
        }
        let seq = v.next_seq();
        let (msg_type, payload) = encode_payload(msg);
        self.outbox.push(AcousticFrame { src: id, dst: BROADCAST, msg_type, seq, payload });
    }

    fn queue_status(&mut self, id: u8) {
        let Some(report) = self.status_report(id) else { return };
        let v = self.vehicles.get_mut(&id).expect("known id");
        if v.state.faults.contains(Faults::COMMS) {
            return;
        }
        v.last_emitted_pos = Some(v.state.pos);
        self.queue_message(id, &TelemetryMessage::Status(report));
    }

    pub fn status_report(&self, id: u8) -> Option<StatusReport> {
        let v = self.vehicles.get(&id)?;
        let geo = self.plan.to_geo(v.state.pos).ok()?;
        let objective_pct = v.state.current_objective.map(|oid| self.objective_progress(v, oid)).unwrap_or(0.0);
        Some(StatusReport {
            lat_e7: to_e7(geo.lat),
            lon_e7: to_e7(geo.lon),
            depth_cm: (v.state.depth_m * 100.0).round() as u16,
            speed_cms: (v.state.speed_kn * KNOT_MPS * 100.0).round() as u16,
            heading_cdeg: ((v.state.heading_deg * 100.0).round() as u32 % 36_000) as u16,
            battery_pct: v.state.battery_pct.round().clamp(0.0, 100.0) as u8,
            fault_bits: v.state.faults.bits(),
            objective_id: v.state.current_objective.unwrap_or(0),
            objective_pct: (objective_pct * 100.0).round().clamp(0.0, 100.0) as u8,
        })
    }

    /// Fraction of the objective's full survey path already covered. Measured
    /// against the plan rather than the current track, which after a replan
    /// only holds the unfinished part.
    fn objective_progress(&self, v: &Vehicle, oid: u8) -> f64 {
        let wps = &v.state.track.waypoints;
        let Some(first) = v.tags.iter().position(|t| *t == Some(oid)) else { return 0.0 };
        let last = v.tags.iter().rposition(|t| *t == Some(oid)).unwrap_or(first);
        let total = self
            .plan
            .objective(oid)
            .and_then(|o| self.plan.objective_waypoints(o).ok())
            .map_or(0.0, |w| path_length(&w));
        if total <= 0.0 {
            return 0.0;
        }
        let idx = v.state.track_index;
        if idx > last {
            return 1.0;
        }
        if idx <= first {
            return 0.0;
        }
        let remaining = v.state.pos.distance(&wps[idx]) + path_length(&wps[idx..=last]);
        (1.0 - remaining / total).clamp(0.0, 1.0)
    }
}
