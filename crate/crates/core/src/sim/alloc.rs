//! Greedy objective allocation with a recorded rule trace per decision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Faults, VehicleKind};
use crate::domain::{dedup_consecutive, path_length, DomainError, EnuPoint, MissionPlan, Track};

/// Vehicles at or below this charge are not given new objectives.
pub const BATTERY_RESERVE_PCT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    NoBlockingFault,
    BatteryAboveReserve,
    MinMarginalCost,
}

impl Condition {
    pub fn is_eligibility(&self) -> bool {
        !matches!(self, Condition::MinMarginalCost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEval {
    pub vehicle_id: u8,
    pub condition: Condition,
    pub value: bool,
    /// Fault bits, battery percent or marginal cost in meters.
    pub detail: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    pub objective_id: u8,
    /// `None` when no vehicle was eligible.
    pub chosen_vehicle: Option<u8>,
    pub trace: Vec<ConditionEval>,
    pub decided_at_s: f64,
}

impl AllocationDecision {
    pub fn conditions_for(&self, vehicle_id: u8) -> impl Iterator<Item = &ConditionEval> {
        self.trace.iter().filter(move |c| c.vehicle_id == vehicle_id)
    }

    pub fn candidates(&self) -> Vec<u8> {
        let mut ids: Vec<u8> = self.trace.iter().map(|c| c.vehicle_id).collect();
        ids.dedup();
        ids
    }

    pub fn detail(&self, vehicle_id: u8, condition: Condition) -> Option<f64> {
        self.conditions_for(vehicle_id).find(|c| c.condition == condition).and_then(|c| c.detail)
    }
}

/// What the allocator needs to know about one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: u8,
    pub kind: VehicleKind,
    pub faults: Faults,
    pub battery_pct: f64,
    /// Where the vehicle's current route ends (objective appended here).
    pub route_end: EnuPoint,
}

pub type Allocation = BTreeMap<u8, u8>;

/// Assigns `objective_ids` (in the given order) to AUVs. Relay vehicles are
/// never candidates.
pub fn allocate_objectives(
    plan: &MissionPlan,
    candidates: &[Candidate],
    objective_ids: &[u8],
    now_s: f64,
) -> Result<(Allocation, Vec<AllocationDecision>), DomainError> {
    let mut auvs: Vec<Candidate> = candidates.iter().filter(|c| c.kind == VehicleKind::Auv).cloned().collect();
    auvs.sort_by_key(|c| c.id);

    let mut allocation = Allocation::new();
    let mut decisions = Vec::new();
    for &oid in objective_ids {
        let Some(objective) = plan.objective(oid) else { continue };
        let waypoints = plan.objective_waypoints(objective)?;
        let entry = waypoints[0];
        let exit = *waypoints.last().unwrap_or(&entry);
        let internal = path_length(&waypoints);

        let mut evals: Vec<(u8, bool, bool, f64, f64)> = Vec::new();
        for c in &auvs {
            let fault_ok = !c.faults.is_blocking();
            let battery_ok = c.battery_pct > BATTERY_RESERVE_PCT;
            let cost = c.route_end.distance(&entry) + internal;
            evals.push((c.id, fault_ok, battery_ok, c.battery_pct, cost));
        }
        let chosen =
            evals.iter().filter(|e| e.1 && e.2).min_by(|a, b| a.4.total_cmp(&b.4).then(a.0.cmp(&b.0))).map(|e| e.0);

        let mut trace = Vec::with_capacity(evals.len() * 3);
        for &(id, fault_ok, battery_ok, battery, cost) in &evals {
            let faults = auvs.iter().find(|c| c.id == id).map(|c| c.faults.bits()).unwrap_or(0);
            trace.push(ConditionEval {
                vehicle_id: id,
                condition: Condition::NoBlockingFault,
                value: fault_ok,
                detail: Some(f64::from(faults)),
            });
            trace.push(ConditionEval {
                vehicle_id: id,
                condition: Condition::BatteryAboveReserve,
                value: battery_ok,
                detail: Some(battery),
            });
            trace.push(ConditionEval {
                vehicle_id: id,
                condition: Condition::MinMarginalCost,
                value: chosen == Some(id),
                detail: Some(cost),
            });
        }

        if let Some(id) = chosen {
            allocation.insert(oid, id);
            if let Some(c) = auvs.iter_mut().find(|c| c.id == id) {
                c.route_end = exit;
            }
        }
        decisions.push(AllocationDecision { objective_id: oid, chosen_vehicle: chosen, trace, decided_at_s: now_s });
    }
    Ok((allocation, decisions))
}

/// A track plus, per waypoint, the objective that waypoint belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub track: Track,
    pub tags: Vec<Option<u8>>,
}

impl Route {
    /// Builds a route from `start` through the objectives (nearest-neighbour
    /// order from the current route end) to `end`.
    pub fn plan(
        plan: &MissionPlan,
        start: EnuPoint,
        objective_ids: &[u8],
        end: EnuPoint,
    ) -> Result<Route, DomainError> {
        let mut remaining: Vec<(u8, Vec<EnuPoint>)> = Vec::new();
        for &oid in objective_ids {
            if let Some(o) = plan.objective(oid) {
                remaining.push((oid, plan.objective_waypoints(o)?));
            }
        }
        let mut points = vec![(start, None)];
        let mut cursor = start;
        while !remaining.is_empty() {
            let (idx, _) = remaining
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    cursor.distance(&a.1[0]).total_cmp(&cursor.distance(&b.1[0])).then(a.0.cmp(&b.0))
                })
                .expect("non-empty");
            let (oid, wps) = remaining.remove(idx);
            cursor = *wps.last().expect("objectives contribute at least one waypoint");
            points.extend(wps.into_iter().map(|p| (p, Some(oid))));
        }
        points.push((end, None));
        Route::from_tagged(points)
    }

    pub(crate) fn from_tagged(points: Vec<(EnuPoint, Option<u8>)>) -> Result<Route, DomainError> {
        let mut out: Vec<(EnuPoint, Option<u8>)> = Vec::new();
        for (p, tag) in points {
            if let Some(last) = out.last_mut() {
                if last.0.distance(&p) < 1e-9 {
                    // Keep the objective tag when an untagged endpoint coincides with it.
                    if last.1.is_none() {
                        last.1 = tag;
                    }
                    continue;
                }
            }
            out.push((p, tag));
        }
        let track = Track::from_points(out.iter().map(|(p, _)| *p))?;
        debug_assert_eq!(track.waypoints, dedup_consecutive(out.iter().map(|(p, _)| *p)));
        Ok(Route { track, tags: out.into_iter().map(|(_, t)| t).collect() })
    }
}

/// Launch → assigned objectives (nearest-neighbour order) → recovery.
pub fn compute_rehearsal_track(
    plan: &MissionPlan,
    allocation: &Allocation,
    vehicle_id: u8,
) -> Result<Track, DomainError> {
    Ok(rehearsal_route(plan, allocation, vehicle_id)?.track)
}

pub(crate) fn rehearsal_route(
    plan: &MissionPlan,
    allocation: &Allocation,
    vehicle_id: u8,
) -> Result<Route, DomainError> {
    let assigned: Vec<u8> = allocation.iter().filter(|(_, v)| **v == vehicle_id).map(|(o, _)| *o).collect();
    Route::plan(plan, plan.to_enu(plan.launch)?, &assigned, plan.to_enu(plan.recovery)?)
}
