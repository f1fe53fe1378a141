//! Scenario files: strict JSON with defaults and path-qualified errors.

use std::collections::BTreeSet;
use std::fmt;
use std::net::SocketAddr;
use std::path::Path;

use auv_c2_core::acoustic::{ChannelParams, CommandCode, BROADCAST};
use auv_c2_core::c2::C2_ADDRESS;
use auv_c2_core::domain::{validate_plan, GeoPoint, MissionPlan};
use auv_c2_core::sim::{FaultSchedule, VehicleKind, VehicleSpec, DEFAULT_RF_RANGE_M, DEFAULT_TICK_MS};
use serde::{Deserialize, Serialize};

pub const DEFAULT_RELAY_LISTEN: &str = "127.0.0.1:40400";
pub const DEFAULT_RELAY_MODEM_ID: u8 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    #[serde(default = "RelayConfig::default_modem_id")]
    pub modem_id: u8,
    #[serde(default = "RelayConfig::default_listen")]
    pub listen: String,
    /// How far the relay vehicle may stray from the shore station.
    #[serde(default = "RelayConfig::default_rf_range")]
    pub rf_range_m: f64,
}

impl RelayConfig {
    fn default_modem_id() -> u8 {
        DEFAULT_RELAY_MODEM_ID
    }
    fn default_listen() -> String {
        DEFAULT_RELAY_LISTEN.to_string()
    }
    fn default_rf_range() -> f64 {
        DEFAULT_RF_RANGE_M
    }
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self { modem_id: DEFAULT_RELAY_MODEM_ID, listen: DEFAULT_RELAY_LISTEN.into(), rf_range_m: DEFAULT_RF_RANGE_M }
    }
}

/// A command the operator issues at a fixed simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorCommand {
    pub t_s: f64,
    pub vehicle_id: u8,
    pub cmd: CommandCode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleEntry {
    id: u8,
    name: String,
    kind: VehicleKind,
    start: GeoPoint,
    max_speed_kn: Option<f64>,
    cruise_speed_kn: Option<f64>,
    hotel_load_pct_per_h: Option<f64>,
    prop_load_pct_per_h_per_kn3: Option<f64>,
    status_period_s: Option<f64>,
}

impl VehicleEntry {
    fn spec(&self) -> VehicleSpec {
        let base = match self.kind {
            VehicleKind::Auv => VehicleSpec::auv(self.id, self.name.clone()),
            VehicleKind::RelayUsv => VehicleSpec::relay(self.id, self.name.clone()),
        };
        VehicleSpec {
            max_speed_kn: self.max_speed_kn.unwrap_or(base.max_speed_kn),
            cruise_speed_kn: self.cruise_speed_kn.unwrap_or(base.cruise_speed_kn),
            hotel_load_pct_per_h: self.hotel_load_pct_per_h.unwrap_or(base.hotel_load_pct_per_h),
            prop_load_pct_per_h_per_kn3: self.prop_load_pct_per_h_per_kn3.unwrap_or(base.prop_load_pct_per_h_per_kn3),
            status_period_s: self.status_period_s.unwrap_or(base.status_period_s),
            ..base
        }
    }
}

fn default_tick() -> u64 {
    DEFAULT_TICK_MS
}

fn default_drain() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_tick")]
    tick_ms: u64,
    duration_s: f64,
    #[serde(default)]
    channel: ChannelParams,
    plan: MissionPlan,
    vehicles: Vec<VehicleEntry>,
    #[serde(default)]
    relay: RelayConfig,
    #[serde(default)]
    fault_schedule: FaultSchedule,
    #[serde(default = "default_drain")]
    drain_multiplier: f64,
    #[serde(default)]
    operator_commands: Vec<OperatorCommand>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub tick_ms: u64,
    pub duration_s: f64,
    pub channel: ChannelParams,
    pub plan: MissionPlan,
    pub vehicles: Vec<(VehicleSpec, GeoPoint)>,
    pub relay: RelayConfig,
    pub fault_schedule: FaultSchedule,
    pub drain_multiplier: f64,
    pub operator_commands: Vec<OperatorCommand>,
}

impl Scenario {
    pub fn duration_ms(&self) -> u64 {
        (self.duration_s * 1000.0).round() as u64
    }

    pub fn relay_vehicle(&self) -> Option<u8> {
        self.vehicles.iter().find(|(s, _)| s.kind == VehicleKind::RelayUsv).map(|(s, _)| s.id)
    }

    pub fn auv_ids(&self) -> Vec<u8> {
        self.vehicles.iter().filter(|(s, _)| s.kind == VehicleKind::Auv).map(|(s, _)| s.id).collect()
    }

    pub fn fleet(&self) -> Vec<VehicleSpec> {
        self.vehicles.iter().map(|(s, _)| s.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub issues: Vec<Issue>,
}

impl ScenarioError {
    fn one(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { issues: vec![Issue { path: path.into(), message: message.into() }] }
    }

    pub fn paths(&self) -> Vec<&str> {
        self.issues.iter().map(|i| i.path.as_str()).collect()
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            if issue.path.is_empty() {
                write!(f, "{}", issue.message)?;
            } else {
                write!(f, "{}: {}", issue.path, issue.message)?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::one("", format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ScenarioError::one(path, e.into_inner().to_string())
    })?;

    let mut issues = Vec::new();
    let mut push = |path: String, message: String| issues.push(Issue { path, message });

    if !(file.duration_s > 0.0) {
        push("duration_s".into(), "must be positive".into());
    }
    if !(1..=10_000).contains(&file.tick_ms) {
        push("tick_ms".into(), "must be in [1, 10000]".into());
    }
    if let Err(m) = file.channel.validate() {
        push("channel".into(), m);
    }
    if !(file.drain_multiplier >= 1.0) {
        push("drain_multiplier".into(), "must be at least 1.0".into());
    }
    if file.relay.listen.parse::<SocketAddr>().is_err() {
        push("relay.listen".into(), format!("'{}' is not an ADDR:PORT socket address", file.relay.listen));
    }
    if !(file.relay.rf_range_m >= 0.0) {
        push("relay.rf_range_m".into(), "must be non-negative".into());
    }
    if file.relay.modem_id == C2_ADDRESS || file.relay.modem_id == BROADCAST {
        push("relay.modem_id".into(), format!("{} is reserved", file.relay.modem_id));
    }
    for v in validate_plan(&file.plan) {
        push(format!("plan.{}", v.path), v.message);
    }

    let mut ids = BTreeSet::new();
    for (i, v) in file.vehicles.iter().enumerate() {
        let base = format!("vehicles[{i}]");
        if !(-90.0..=90.0).contains(&v.start.lat) {
            push(format!("{base}.start.lat"), format!("latitude {} outside [-90, 90]", v.start.lat));
        }
        if !(-180.0..=180.0).contains(&v.start.lon) {
            push(format!("{base}.start.lon"), format!("longitude {} outside [-180, 180]", v.start.lon));
        } else if v.start.validate().is_ok() && file.plan.to_enu(v.start).is_err() {
            push(format!("{base}.start"), "too far from the plan origin".into());
        }
        if !ids.insert(v.id) {
            push(format!("{base}.id"), format!("duplicate vehicle id {}", v.id));
        }
        if v.id == file.relay.modem_id {
            push(format!("{base}.id"), format!("vehicle id {} collides with the relay modem id", v.id));
        }
        if v.id == C2_ADDRESS || v.id == BROADCAST {
            push(format!("{base}.id"), format!("vehicle id {} is reserved", v.id));
        }
        if let Err(m) = v.spec().validate() {
            push(base.clone(), m);
        }
    }
    if !file.vehicles.iter().any(|v| v.kind == VehicleKind::Auv) {
        push("vehicles".into(), "at least one AUV is required".into());
    }
    if file.vehicles.iter().filter(|v| v.kind == VehicleKind::RelayUsv).count() > 1 {
        push("vehicles".into(), "at most one relay vehicle is supported".into());
    }

    if let Err(m) = file.fault_schedule.validate() {
        push("fault_schedule".into(), m);
    }
    for (i, e) in file.fault_schedule.entries.iter().enumerate() {
        if !ids.contains(&e.vehicle_id) {
            push(format!("fault_schedule[{i}].vehicle_id"), format!("unknown vehicle {}", e.vehicle_id));
        }
    }
    for (i, c) in file.operator_commands.iter().enumerate() {
        if !(c.t_s >= 0.0 && c.t_s <= file.duration_s) {
            push(format!("operator_commands[{i}].t_s"), "must lie within [0, duration_s]".into());
        }
        if !ids.contains(&c.vehicle_id) {
            push(format!("operator_commands[{i}].vehicle_id"), format!("unknown vehicle {}", c.vehicle_id));
        }
    }
    if file.operator_commands.windows(2).any(|w| w[0].t_s > w[1].t_s) {
        push("operator_commands".into(), "entries must be sorted by t_s".into());
    }

    if !issues.is_empty() {
        return Err(ScenarioError { issues });
    }
    let _ = file.description;
    Ok(Scenario {
        name: file.name.unwrap_or_else(|| "scenario".into()),
        seed: file.seed,
        tick_ms: file.tick_ms,
        duration_s: file.duration_s,
        channel: file.channel,
        plan: file.plan,
        vehicles: file.vehicles.iter().map(|v| (v.spec(), v.start)).collect(),
        relay: file.relay,
        fault_schedule: file.fault_schedule,
        drain_multiplier: file.drain_multiplier,
        operator_commands: file.operator_commands,
    })
}
