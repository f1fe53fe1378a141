//! "Why" and "why not" answers rendered from stored allocation traces.

use serde::Serialize;
use thiserror::Error;

use super::MissionDb;
use crate::sim::{AllocationDecision, Condition, ConditionEval, Faults};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExplainError {
    #[error("no allocation decision for that objective")]
    NoDecision,
    #[error("that vehicle was chosen")]
    VehicleWasChosen,
    #[error("that vehicle was not considered")]
    NotACandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplanationKind {
    Why,
    WhyNot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub kind: ExplanationKind,
    pub vehicle_id: u8,
    pub objective_id: u8,
    pub text: String,
    /// Trace entries the text is built from.
    pub cited: Vec<ConditionEval>,
    pub decision: AllocationDecision,
}

fn meters(v: f64) -> String {
    format!("{v:.0} m")
}

fn blocking_fault_phrase(bits: u8) -> String {
    let blocking = Faults::from_bits(bits & (Faults::MOTOR.bits() | Faults::NAV.bits()));
    let names = blocking.names();
    match names.as_slice() {
        [] => "a blocking fault".to_string(),
        [one] => format!("a {one} fault"),
        many => format!("{} faults", many.join(" and ")),
    }
}

impl MissionDb {
    /// The most recent decision for an objective (replans supersede).
    pub fn decision_for(&self, objective_id: u8) -> Option<&AllocationDecision> {
        self.decisions.iter().rev().find(|d| d.objective_id == objective_id)
    }

    fn objective_label(&self, objective_id: u8) -> String {
        self.objective(objective_id).map_or_else(|| format!("Objective {objective_id}"), |o| o.name.clone())
    }

    pub fn explain_why(&self, vehicle_id: u8, objective_id: u8) -> Result<Explanation, ExplainError> {
        let d = self.decision_for(objective_id).ok_or(ExplainError::NoDecision)?;
        if d.chosen_vehicle != Some(vehicle_id) {
            return self.explain_why_not(vehicle_id, objective_id);
        }
        let cited: Vec<ConditionEval> = d.conditions_for(vehicle_id).filter(|c| c.value).cloned().collect();
        let cost = d.detail(vehicle_id, Condition::MinMarginalCost).unwrap_or(0.0);
        let battery = d.detail(vehicle_id, Condition::BatteryAboveReserve).unwrap_or(0.0);
        let mut rivals: Vec<f64> = d
            .candidates()
            .into_iter()
            .filter(|&id| id != vehicle_id)
            .filter(|&id| d.conditions_for(id).filter(|c| c.condition.is_eligibility()).all(|c| c.value))
            .filter_map(|id| d.detail(id, Condition::MinMarginalCost))
            .collect();
        rivals.sort_by(f64::total_cmp);
        let reason = if rivals.is_empty() {
            "it was the only eligible vehicle".to_string()
        } else {
            let others: Vec<String> = rivals.iter().map(|c| meters(*c)).collect();
            format!("it was the closest eligible vehicle: {} vs {}", meters(cost), others.join(", "))
        };
        let text = format!(
            "Vehicle {vehicle_id} was assigned {} because {reason}; battery {battery:.0}% above reserve; no blocking faults.",
            self.objective_label(objective_id)
        );
        Ok(Explanation { kind: ExplanationKind::Why, vehicle_id, objective_id, text, cited, decision: d.clone() })
    }

    pub fn explain_why_not(&self, vehicle_id: u8, objective_id: u8) -> Result<Explanation, ExplainError> {
        let d = self.decision_for(objective_id).ok_or(ExplainError::NoDecision)?;
        if d.chosen_vehicle == Some(vehicle_id) {
            return Err(ExplainError::VehicleWasChosen);
        }
        // Eligibility entries precede the cost entry in the trace.
        let failed = d.conditions_for(vehicle_id).find(|c| !c.value).cloned().ok_or(ExplainError::NotACandidate)?;
        let detail = failed.detail.unwrap_or(0.0);
        let reason = match failed.condition {
            Condition::NoBlockingFault => format!("it had {}", blocking_fault_phrase(detail as u8)),
            Condition::BatteryAboveReserve => {
                format!(
                    "its battery was at {detail:.0}%, not above the {:.0}% reserve",
                    crate::sim::BATTERY_RESERVE_PCT
                )
            }
            Condition::MinMarginalCost => match d.chosen_vehicle {
                Some(w) => {
                    let theirs = d.detail(w, Condition::MinMarginalCost).unwrap_or(0.0);
                    if detail > theirs {
                        format!("its route cost {} exceeded Vehicle {w}'s {}", meters(detail), meters(theirs))
                    } else {
                        format!("its route cost {} tied with Vehicle {w}'s and the lower id wins", meters(detail))
                    }
                }
                None => "no vehicle was chosen".to_string(),
            },
        };
        let text =
            format!("Vehicle {vehicle_id} was not assigned {} because {reason}.", self.objective_label(objective_id));
        Ok(Explanation {
            kind: ExplanationKind::WhyNot,
            vehicle_id,
            objective_id,
            text,
            cited: vec![failed],
            decision: d.clone(),
        })
    }
}
