//! Rule-based natural-language front end over the mission database.

mod grammar;
mod render;

pub use grammar::{extract_slots, normalize, parse_utterance};
pub use render::{notification_to_text, CLARIFY_OBJECTIVE, CLARIFY_VEHICLE, FALLBACK_TEXT, HELP_TEXT};

use serde::Serialize;

use crate::acoustic::{AcousticFrame, CommandCode};
use crate::c2::{AssetState, C2Error, ExplainError, Explanation, MissionDb, MissionProgress, VehiclePhase};
use crate::domain::ObjectiveState;
use crate::sim::Faults;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum IntentName {
    QueryStatus,
    QueryBattery,
    QuerySpeed,
    QueryPosition,
    QueryDepth,
    QueryMissionProgress,
    QueryObjectiveStatus,
    QueryEta,
    ExplainWhy,
    ExplainWhyNot,
    CmdStartMission,
    CmdAbort,
    ListVehicles,
    Help,
    Fallback,
}

impl IntentName {
    pub const ALL: [IntentName; 15] = [
        IntentName::QueryStatus,
        IntentName::QueryBattery,
        IntentName::QuerySpeed,
        IntentName::QueryPosition,
        IntentName::QueryDepth,
        IntentName::QueryMissionProgress,
        IntentName::QueryObjectiveStatus,
        IntentName::QueryEta,
        IntentName::ExplainWhy,
        IntentName::ExplainWhyNot,
        IntentName::CmdStartMission,
        IntentName::CmdAbort,
        IntentName::ListVehicles,
        IntentName::Help,
        IntentName::Fallback,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            IntentName::QueryStatus => "QueryStatus",
            IntentName::QueryBattery => "QueryBattery",
            IntentName::QuerySpeed => "QuerySpeed",
            IntentName::QueryPosition => "QueryPosition",
            IntentName::QueryDepth => "QueryDepth",
            IntentName::QueryMissionProgress => "QueryMissionProgress",
            IntentName::QueryObjectiveStatus => "QueryObjectiveStatus",
            IntentName::QueryEta => "QueryEta",
            IntentName::ExplainWhy => "ExplainWhy",
            IntentName::ExplainWhyNot => "ExplainWhyNot",
            IntentName::CmdStartMission => "CmdStartMission",
            IntentName::CmdAbort => "CmdAbort",
            IntentName::ListVehicles => "ListVehicles",
            IntentName::Help => "Help",
            IntentName::Fallback => "Fallback",
        }
    }

    fn needs_vehicle(&self) -> bool {
        matches!(
            self,
            IntentName::QueryStatus
                | IntentName::QueryBattery
                | IntentName::QuerySpeed
                | IntentName::QueryPosition
                | IntentName::QueryDepth
                | IntentName::QueryEta
                | IntentName::ExplainWhy
                | IntentName::ExplainWhyNot
                | IntentName::CmdStartMission
                | IntentName::CmdAbort
        )
    }

    fn needs_objective(&self) -> bool {
        matches!(self, IntentName::ExplainWhy | IntentName::ExplainWhyNot | IntentName::QueryObjectiveStatus)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Slots {
    pub vehicle: Option<u8>,
    pub objective: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Intent {
    pub name: IntentName,
    pub slots: Slots,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DialogueContext {
    pub last_vehicle: Option<u8>,
    pub last_objective: Option<u8>,
    pub turn_count: u64,
    /// Intent waiting on a clarification answer.
    pub pending: Option<Intent>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Grounded(Intent),
    Clarify { question: &'static str, intent: Intent },
}

/// Fills missing slots from context, or from the mission when only one
/// candidate exists.
pub fn resolve(intent: Intent, ctx: &DialogueContext, db: &MissionDb) -> Resolution {
    let mut intent = intent;
    let unique = |ids: Vec<u8>| (ids.len() == 1).then(|| ids[0]);
    if intent.name.needs_objective() && intent.slots.objective.is_none() {
        intent.slots.objective = ctx.last_objective.or_else(|| unique(db.objectives().map(|o| o.id).collect()));
        if intent.slots.objective.is_none() {
            return Resolution::Clarify { question: CLARIFY_OBJECTIVE, intent };
        }
    }
    if intent.name.needs_vehicle() && intent.slots.vehicle.is_none() {
        intent.slots.vehicle = ctx.last_vehicle.or_else(|| unique(db.vehicles().map(|v| v.id).collect()));
        if intent.slots.vehicle.is_none() && intent.name == IntentName::ExplainWhy {
            intent.slots.vehicle =
                intent.slots.objective.and_then(|o| db.decision_for(o)).and_then(|d| d.chosen_vehicle);
        }
        if intent.slots.vehicle.is_none() {
            return Resolution::Clarify { question: CLARIFY_VEHICLE, intent };
        }
    }
    Resolution::Grounded(intent)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Battery { vehicle: u8, pct: u8 },
    Speed { vehicle: u8, kn: f64 },
    Position { vehicle: u8, lat: f64, lon: f64 },
    Depth { vehicle: u8, m: f64 },
    Status { vehicle: u8, phase: VehiclePhase, objective: Option<(String, u8)>, battery: u8, kn: f64, faults: Faults },
    NoData { vehicle: u8 },
    MissionProgress(MissionProgress),
    ObjectiveStatus { name: String, state: ObjectiveState, fraction: f64 },
    Eta { vehicle: u8, seconds: Option<f64> },
    Explanation(Explanation),
    ExplainFailed { vehicle: u8, objective: u8, objective_name: String, error: ExplainError },
    CommandSent { vehicle: u8, cmd: CommandCode, seq: u16 },
    Vehicles(Vec<(u8, String, AssetState)>),
    UnknownVehicle(u8),
    UnknownObjective(u8),
    Help,
    Clarify(&'static str),
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecResult {
    pub outcome: Outcome,
    /// Vehicle the answer came from, for staleness rendering.
    pub source: Option<u8>,
    pub frames: Vec<AcousticFrame>,
}

impl ExecResult {
    fn of(outcome: Outcome) -> Self {
        Self { outcome, source: None, frames: Vec::new() }
    }

    fn is_error(&self) -> bool {
        matches!(
            self.outcome,
            Outcome::UnknownVehicle(_)
                | Outcome::UnknownObjective(_)
                | Outcome::ExplainFailed { .. }
                | Outcome::Fallback
                | Outcome::Clarify(_)
        )
    }
}

/// Runs a grounded intent against the database. Commands are queued for
/// acknowledgement tracking and their frames returned.
pub fn execute(intent: &Intent, db: &mut MissionDb, now_ms: u64) -> ExecResult {
    let vid = intent.slots.vehicle;
    if intent.name.needs_vehicle() {
        let v = vid.expect("grounded intent has a vehicle");
        if db.vehicle(v).is_none() {
            return ExecResult::of(Outcome::UnknownVehicle(v));
        }
    }
    if intent.name == IntentName::QueryObjectiveStatus {
        let o = intent.slots.objective.expect("grounded intent has an objective");
        if db.objective(o).is_none() {
            return ExecResult::of(Outcome::UnknownObjective(o));
        }
    }

    let sourced = |outcome: Outcome| ExecResult { outcome, source: vid, frames: Vec::new() };
    let status = vid.and_then(|v| db.vehicle(v)).and_then(|r| r.last_status);
    let needs_status = matches!(
        intent.name,
        IntentName::QueryBattery
            | IntentName::QuerySpeed
            | IntentName::QueryPosition
            | IntentName::QueryDepth
            | IntentName::QueryStatus
    );
    if needs_status && status.is_none() {
        return ExecResult::of(Outcome::NoData { vehicle: vid.unwrap_or(0) });
    }

    match intent.name {
        IntentName::QueryBattery => {
            let s = status.expect("checked");
            sourced(Outcome::Battery { vehicle: vid.unwrap_or(0), pct: s.battery_pct })
        }
        IntentName::QuerySpeed => {
            let s = status.expect("checked");
            sourced(Outcome::Speed { vehicle: vid.unwrap_or(0), kn: s.speed_kn() })
        }
        IntentName::QueryPosition => {
            let s = status.expect("checked");
            sourced(Outcome::Position { vehicle: vid.unwrap_or(0), lat: s.lat(), lon: s.lon() })
        }
        IntentName::QueryDepth => {
            let s = status.expect("checked");
            sourced(Outcome::Depth { vehicle: vid.unwrap_or(0), m: s.depth_m() })
        }
        IntentName::QueryStatus => {
            let v = vid.unwrap_or(0);
            let s = status.expect("checked");
            let rec = db.vehicle(v).expect("checked");
            let objective = (s.objective_id != 0).then(|| {
                let name = db
                    .objective(s.objective_id)
                    .map_or_else(|| format!("Objective {}", s.objective_id), |o| o.name.clone());
                (name, s.objective_pct)
            });
            sourced(Outcome::Status {
                vehicle: v,
                phase: rec.phase,
                objective,
                battery: s.battery_pct,
                kn: s.speed_kn(),
                faults: rec.faults,
            })
        }
        IntentName::QueryEta => {
            let v = vid.unwrap_or(0);
            sourced(Outcome::Eta { vehicle: v, seconds: db.estimate_eta(v) })
        }
        IntentName::QueryMissionProgress => ExecResult::of(Outcome::MissionProgress(db.mission_progress())),
        IntentName::QueryObjectiveStatus => {
            let o = intent.slots.objective.expect("checked");
            let progress = db.mission_progress();
            let p = progress.objectives.iter().find(|p| p.id == o).expect("known objective");
            ExecResult::of(Outcome::ObjectiveStatus { name: p.name.clone(), state: p.state, fraction: p.fraction })
        }
        IntentName::ExplainWhy | IntentName::ExplainWhyNot => {
            let v = vid.expect("checked");
            let o = intent.slots.objective.expect("grounded intent has an objective");
            let result =
                if intent.name == IntentName::ExplainWhy { db.explain_why(v, o) } else { db.explain_why_not(v, o) };
            match result {
                Ok(e) => ExecResult::of(Outcome::Explanation(e)),
                Err(error) => {
                    let objective_name = db.objective(o).map_or_else(|| format!("Objective {o}"), |r| r.name.clone());
                    ExecResult::of(Outcome::ExplainFailed { vehicle: v, objective: o, objective_name, error })
                }
            }
        }
        IntentName::CmdStartMission | IntentName::CmdAbort => {
            let v = vid.expect("checked");
            let cmd = if intent.name == IntentName::CmdAbort {
                CommandCode::AbortToRecovery
            } else {
                CommandCode::StartMission
            };
            match db.issue_command(v, cmd, now_ms) {
                Ok((frame, seq)) => ExecResult {
                    outcome: Outcome::CommandSent { vehicle: v, cmd, seq },
                    source: None,
                    frames: vec![frame],
                },
                Err(C2Error::UnknownVehicle(v)) => ExecResult::of(Outcome::UnknownVehicle(v)),
            }
        }
        IntentName::ListVehicles => {
            ExecResult::of(Outcome::Vehicles(db.vehicles().map(|r| (r.id, r.name.clone(), r.asset_state)).collect()))
        }
        IntentName::Help => ExecResult::of(Outcome::Help),
        IntentName::Fallback => ExecResult::of(Outcome::Fallback),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reply {
    pub text: String,
    pub intent: Intent,
    pub ok: bool,
    pub staleness_suffix_applied: bool,
    /// Command frames produced by this turn.
    #[serde(skip)]
    pub frames: Vec<AcousticFrame>,
}

pub fn render_reply(intent: Intent, result: &ExecResult, db: &MissionDb, now_ms: u64) -> Reply {
    let mut text = render::render_text(result);
    let mut stale = false;
    if let Some(rec) = result.source.and_then(|v| db.vehicle(v)) {
        if matches!(rec.asset_state, AssetState::Stale | AssetState::Lost) {
            if let Some(age) = rec.last_heard_s(now_ms) {
                text = render::with_staleness(&text, age);
                stale = true;
            }
        }
    }
    Reply { text, intent, ok: !result.is_error(), staleness_suffix_applied: stale, frames: result.frames.clone() }
}

/// One full chat turn for `session`. Never fails.
pub fn handle(session: &str, text: &str, db: &mut MissionDb, now_ms: u64) -> Reply {
    let vehicles: Vec<(u8, String)> = db.vehicles().map(|v| (v.id, v.name.clone())).collect();
    let objectives: Vec<(u8, String)> = db.objectives().map(|o| (o.id, o.name.clone())).collect();
    let tokens = normalize(text);
    let parsed = parse_utterance(&tokens, &vehicles, &objectives);
    let mut ctx = db.chat_sessions.get(session).cloned().unwrap_or_default();

    let intent = match ctx.pending.take() {
        Some(pending)
            if parsed.name == IntentName::Fallback
                && (parsed.slots.vehicle.is_some() || parsed.slots.objective.is_some()) =>
        {
            Intent {
                name: pending.name,
                slots: Slots {
                    vehicle: pending.slots.vehicle.or(parsed.slots.vehicle),
                    objective: pending.slots.objective.or(parsed.slots.objective),
                },
            }
        }
        _ => parsed,
    };

    if intent.name == IntentName::Fallback {
        db.chat_sessions.insert(session.to_string(), ctx);
        let result = ExecResult::of(Outcome::Fallback);
        return render_reply(intent, &result, db, now_ms);
    }

    ctx.turn_count += 1;
    let reply = match resolve(intent, &ctx, db) {
        Resolution::Clarify { question, intent } => {
            ctx.pending = Some(intent);
            render_reply(intent, &ExecResult::of(Outcome::Clarify(question)), db, now_ms)
        }
        Resolution::Grounded(intent) => {
            if let Some(v) = intent.slots.vehicle.filter(|v| db.vehicle(*v).is_some()) {
                ctx.last_vehicle = Some(v);
            }
            if let Some(o) = intent.slots.objective.filter(|o| db.objective(*o).is_some()) {
                ctx.last_objective = Some(o);
            }
            let result = execute(&intent, db, now_ms);
            render_reply(intent, &result, db, now_ms)
        }
    };
    db.chat_sessions.insert(session.to_string(), ctx);
    reply
}
