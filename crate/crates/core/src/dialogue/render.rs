//! Reply and notification templates.
//!
//! One phrasing per intent:
//!
//! | intent | template |
//! |---|---|
//! | QueryBattery | `Vehicle {v}'s battery is at {pct}%.` |
//! | QuerySpeed | `Vehicle {v} is moving at {kn:.1} knots.` |
//! | QueryPosition | `Vehicle {v} is at {lat:.5}, {lon:.5}.` |
//! | QueryDepth | `Vehicle {v} is at {m:.1} m depth.` |
//! | QueryStatus | `Vehicle {v} is {activity}: battery {pct}%, speed {kn:.1} knots, {faults}.` |
//! | QueryMissionProgress | `The mission is {pct}% complete: {name} {pct}%, ...` |
//! | QueryObjectiveStatus | `{name} is complete.` / `{name} is in progress ({pct}% done).` / `{name} has not started.` / `{name} was aborted.` |
//! | QueryEta | `Vehicle {v} should reach the recovery point in about {n} min.` / `Vehicle {v} is not underway, so I have no ETA.` |
//! | ExplainWhy / ExplainWhyNot | explanation text from the mission database |
//! | CmdStartMission / CmdAbort | `Sent {command} to Vehicle {v} (command {seq}); awaiting acknowledgement.` |
//! | ListVehicles | `Known vehicles: Vehicle {v} ({name}, {state}), ...` |
//! | Help | fixed help text |
//! | Fallback | `Sorry, I didn't understand. Try 'help'.` |
//!
//! Replies sourced from a stale or lost vehicle get a "last heard {n} s ago" suffix (see `with_staleness`).

use super::{ExecResult, Outcome};
use crate::c2::{
    ExplainError, Notification, NotificationKind, VehiclePhase, ABORT_REASON_BATTERY, ABORT_REASON_FAULT,
    ABORT_REASON_OPERATOR,
};
use crate::domain::ObjectiveState;
use crate::sim::Faults;

pub const FALLBACK_TEXT: &str = "Sorry, I didn't understand. Try 'help'.";
pub const HELP_TEXT: &str = "You can ask about a vehicle's status, battery, speed, position, depth or ETA, \
about mission or objective progress, why a vehicle was or was not given an objective, \
or ask me to start the mission or abort a vehicle to recovery.";
pub const CLARIFY_VEHICLE: &str = "Which vehicle do you mean?";
pub const CLARIFY_OBJECTIVE: &str = "Which objective do you mean?";

fn pct(fraction: f64) -> String {
    let s = format!("{:.1}", fraction * 100.0);
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn fault_list(f: Faults) -> String {
    let names = f.names();
    if names.is_empty() {
        "no faults".to_string()
    } else {
        format!("faults: {}", names.join(", "))
    }
}

fn fault_phrase(bits: u8) -> (String, bool) {
    let names = Faults::from_bits(bits).names();
    match names.as_slice() {
        [] => ("unknown".to_string(), false),
        [one] => (one.to_string(), false),
        many => (many.join(" and "), true),
    }
}

pub(super) fn render_text(result: &ExecResult) -> String {
    match &result.outcome {
        Outcome::Battery { vehicle, pct } => format!("Vehicle {vehicle}'s battery is at {pct}%."),
        Outcome::Speed { vehicle, kn } => format!("Vehicle {vehicle} is moving at {kn:.1} knots."),
        Outcome::Position { vehicle, lat, lon } => format!("Vehicle {vehicle} is at {lat:.5}, {lon:.5}."),
        Outcome::Depth { vehicle, m } => format!("Vehicle {vehicle} is at {m:.1} m depth."),
        Outcome::Status { vehicle, phase, objective, battery, kn, faults } => {
            let activity = match (phase, objective) {
                (VehiclePhase::Aborting, _) => "returning to the recovery point".to_string(),
                (VehiclePhase::Recovered, _) => "recovered".to_string(),
                (_, Some((name, p))) => format!("working on {name} ({p}% done)"),
                (VehiclePhase::Underway, None) => "in transit".to_string(),
                (VehiclePhase::Unknown, None) if *kn > 0.0 => "in transit".to_string(),
                (VehiclePhase::Unknown, None) => "idle".to_string(),
            };
            format!(
                "Vehicle {vehicle} is {activity}: battery {battery}%, speed {kn:.1} knots, {}.",
                fault_list(*faults)
            )
        }
        Outcome::NoData { vehicle } => format!("I have not heard from Vehicle {vehicle} yet."),
        Outcome::MissionProgress(p) => {
            if p.objectives.is_empty() {
                return "There are no objectives in the mission.".to_string();
            }
            let parts: Vec<String> = p.objectives.iter().map(|o| format!("{} {}%", o.name, pct(o.fraction))).collect();
            format!("The mission is {}% complete: {}.", pct(p.overall), parts.join(", "))
        }
        Outcome::ObjectiveStatus { name, state, fraction } => match state {
            ObjectiveState::Complete => format!("{name} is complete."),
            ObjectiveState::Active => format!("{name} is in progress ({}% done).", pct(*fraction)),
            ObjectiveState::Pending => format!("{name} has not started."),
            ObjectiveState::Aborted => format!("{name} was aborted."),
        },
        Outcome::Eta { vehicle, seconds: Some(s) } => {
            if *s < 60.0 {
                format!("Vehicle {vehicle} should reach the recovery point in under a minute.")
            } else {
                format!("Vehicle {vehicle} should reach the recovery point in about {:.0} min.", s / 60.0)
            }
        }
        Outcome::Eta { vehicle, seconds: None } => format!("Vehicle {vehicle} is not underway, so I have no ETA."),
        Outcome::Explanation(e) => e.text.clone(),
        Outcome::ExplainFailed { vehicle, objective, objective_name, error } => match error {
            ExplainError::NoDecision => format!("Sorry, I have no allocation decision for Objective {objective}."),
            ExplainError::VehicleWasChosen => {
                format!("Vehicle {vehicle} was assigned {objective_name}; ask why to hear the reasons.")
            }
            ExplainError::NotACandidate => {
                format!("Vehicle {vehicle} was not considered for {objective_name} when it was allocated.")
            }
        },
        Outcome::CommandSent { vehicle, cmd, seq } => {
            format!("Sent {} to Vehicle {vehicle} (command {seq}); awaiting acknowledgement.", cmd.describe())
        }
        Outcome::Vehicles(list) => {
            if list.is_empty() {
                return "No vehicles are known yet.".to_string();
            }
            let parts: Vec<String> =
                list.iter().map(|(id, name, state)| format!("Vehicle {id} ({name}, {})", state.as_str())).collect();
            format!("Known vehicles: {}.", parts.join(", "))
        }
        Outcome::UnknownVehicle(v) => format!("Sorry, I don't know Vehicle {v}."),
        Outcome::UnknownObjective(o) => format!("Sorry, I don't know Objective {o}."),
        Outcome::Help => HELP_TEXT.to_string(),
        Outcome::Clarify(q) => q.to_string(),
        Outcome::Fallback => FALLBACK_TEXT.to_string(),
    }
}

/// Replaces the closing period with the staleness suffix.
pub(super) fn with_staleness(text: &str, last_heard_s: u64) -> String {
    let base = text.strip_suffix('.').unwrap_or(text);
    format!("{base} — last heard {last_heard_s} s ago.")
}

pub fn notification_to_text(n: &Notification) -> String {
    let v = n.vehicle_id.map_or_else(|| "A vehicle".to_string(), |id| format!("Vehicle {id}"));
    match n.kind {
        NotificationKind::Discovered => format!("{v} is now in contact."),
        NotificationKind::ObjectiveCompleted => match n.objective_id {
            Some(o) => format!("{v} has completed Objective {o}."),
            None => format!("{v} has completed an objective."),
        },
        NotificationKind::FaultOnset { fault_bits } => match fault_phrase(fault_bits) {
            (names, true) => format!("⚠ FAULT: {v} reports {names} faults."),
            (name, false) => format!("⚠ FAULT: {v} reports a {name} fault."),
        },
        NotificationKind::FaultCleared { fault_bits } => match fault_phrase(fault_bits) {
            (names, true) => format!("{v}'s {names} faults have cleared."),
            (name, false) => format!("{v}'s {name} fault has cleared."),
        },
        NotificationKind::Aborting { reason } => {
            let why = match reason {
                ABORT_REASON_FAULT => " after a fault",
                ABORT_REASON_BATTERY => " on low battery",
                ABORT_REASON_OPERATOR => " on operator command",
                _ => "",
            };
            format!("Warning: {v} is aborting to the recovery point{why}.")
        }
        NotificationKind::MissionComplete => "All mission objectives are complete.".to_string(),
        NotificationKind::Recovered => format!("{v} has reached the recovery point."),
        NotificationKind::BatteryLow { battery_pct } => format!("Warning: {v}'s battery is low at {battery_pct}%."),
        NotificationKind::ContactLost => format!("Warning: contact lost with {v}."),
        NotificationKind::CommandAcked { cmd, status: 0 } => {
            format!("{v} acknowledged the {} command.", cmd.describe())
        }
        NotificationKind::CommandAcked { cmd, .. } => format!("Warning: {v} rejected the {} command.", cmd.describe()),
        NotificationKind::CommandFailed { cmd, attempts } => format!(
            "Critical: command undelivered. {v} did not acknowledge the {} command after {attempts} attempts.",
            cmd.describe()
        ),
    }
}
