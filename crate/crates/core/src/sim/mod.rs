//! Deterministic stepped simulation of the survey vehicles and the relay
//! surface vehicle.

mod alloc;
mod world;

use serde::{Deserialize, Serialize};

pub use alloc::{
    allocate_objectives, compute_rehearsal_track, Allocation, AllocationDecision, Candidate, Condition, ConditionEval,
    Route, BATTERY_RESERVE_PCT,
};
pub use world::{
    station_keeping_target, SimError, StepOutput, Vehicle, World, WorldOptions, ABORT_BATTERY_PCT, CAPTURE_RADIUS_M,
    DEFAULT_RF_RANGE_M, DEFAULT_TICK_MS,
};

use crate::domain::{EnuPoint, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Auv,
    RelayUsv,
}

fn default_status_period() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    /// Acoustic address.
    pub id: u8,
    pub name: String,
    pub kind: VehicleKind,
    #[serde(default = "VehicleSpec::default_max_speed")]
    pub max_speed_kn: f64,
    #[serde(default = "VehicleSpec::default_cruise_speed")]
    pub cruise_speed_kn: f64,
    /// Battery percent per hour spent regardless of speed (h0).
    #[serde(default = "VehicleSpec::default_hotel_load")]
    pub hotel_load_pct_per_h: f64,
    /// Battery percent per hour per knot cubed (h1).
    #[serde(default = "VehicleSpec::default_prop_load")]
    pub prop_load_pct_per_h_per_kn3: f64,
    #[serde(default = "default_status_period")]
    pub status_period_s: f64,
}

impl VehicleSpec {
    fn default_max_speed() -> f64 {
        4.0
    }
    fn default_cruise_speed() -> f64 {
        2.5
    }
    fn default_hotel_load() -> f64 {
        4.5
    }
    fn default_prop_load() -> f64 {
        0.294
    }

    /// AUV with the stock IVER-class figures.
    pub fn auv(id: u8, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
            kind: VehicleKind::Auv,
            max_speed_kn: 4.0,
            cruise_speed_kn: 2.5,
            hotel_load_pct_per_h: 4.5,
            prop_load_pct_per_h_per_kn3: 0.294,
            status_period_s: 30.0,
        }
    }

    pub fn relay(id: u8, name: impl Into<String>) -> Self {
        Self { kind: VehicleKind::RelayUsv, ..Self::auv(id, name) }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.cruise_speed_kn > 0.0 && self.cruise_speed_kn <= self.max_speed_kn) {
            return Err(format!("cruise speed must be in (0, max_speed_kn={}]", self.max_speed_kn));
        }
        if !(self.hotel_load_pct_per_h >= 0.0 && self.prop_load_pct_per_h_per_kn3 >= 0.0) {
            return Err("battery load coefficients must be non-negative".into());
        }
        if !(self.status_period_s > 0.0) {
            return Err("status_period_s must be positive".into());
        }
        Ok(())
    }

    /// Battery drain rate in percent per hour at `speed_kn`.
    pub fn drain_pct_per_h(&self, speed_kn: f64) -> f64 {
        self.hotel_load_pct_per_h + self.prop_load_pct_per_h_per_kn3 * speed_kn.powi(3)
    }
}

/// Fault bit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Faults(u8);

impl Faults {
    pub const NONE: Faults = Faults(0);
    pub const MOTOR: Faults = Faults(1);
    pub const SENSOR: Faults = Faults(2);
    pub const NAV: Faults = Faults(4);
    pub const COMMS: Faults = Faults(8);

    pub const fn from_bits(bits: u8) -> Self {
        Faults(bits)
    }

    pub const fn bits(&self) -> u8 {
        self.0
    }

    pub fn contains(&self, other: Faults) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn insert(&mut self, other: Faults) {
        self.0 |= other.0;
    }

    pub fn remove(&mut self, other: Faults) {
        self.0 &= !other.0;
    }

    /// MOTOR and NAV faults make a vehicle ineligible and force an abort.
    pub fn is_blocking(&self) -> bool {
        self.0 & (Faults::MOTOR.0 | Faults::NAV.0) != 0
    }

    /// Lowercase names of the set bits, lowest bit first.
    pub fn names(&self) -> Vec<&'static str> {
        FaultKind::ALL.iter().filter(|k| self.contains(k.bit())).map(|k| k.name()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Motor,
    Sensor,
    Nav,
    Comms,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] = [FaultKind::Motor, FaultKind::Sensor, FaultKind::Nav, FaultKind::Comms];

    pub fn bit(&self) -> Faults {
        match self {
            FaultKind::Motor => Faults::MOTOR,
            FaultKind::Sensor => Faults::SENSOR,
            FaultKind::Nav => Faults::NAV,
            FaultKind::Comms => Faults::COMMS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::Motor => "motor",
            FaultKind::Sensor => "sensor",
            FaultKind::Nav => "navigation",
            FaultKind::Comms => "communications",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultAction {
    Set,
    Clear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub t_s: f64,
    pub vehicle_id: u8,
    pub fault: FaultKind,
    pub action: FaultAction,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultSchedule {
    pub entries: Vec<FaultEntry>,
}

impl FaultSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if self.entries.iter().any(|e| !(e.t_s >= 0.0)) {
            return Err("fault times must be non-negative".into());
        }
        if self.entries.windows(2).any(|w| w[0].t_s > w[1].t_s) {
            return Err("fault entries must be sorted by t_s".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Idle,
    Transit,
    Survey,
    Reacquire,
    AbortToRecovery,
    Recovered,
}

impl Mode {
    /// Modes in which the vehicle follows its track.
    pub fn is_underway(&self) -> bool {
        matches!(self, Mode::Transit | Mode::Survey | Mode::Reacquire | Mode::AbortToRecovery)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Idle => "idle",
            Mode::Transit => "transit",
            Mode::Survey => "survey",
            Mode::Reacquire => "reacquire",
            Mode::AbortToRecovery => "abort_to_recovery",
            Mode::Recovered => "recovered",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub pos: EnuPoint,
    pub depth_m: f64,
    pub heading_deg: f64,
    pub speed_kn: f64,
    pub battery_pct: f64,
    pub faults: Faults,
    pub mode: Mode,
    pub current_objective: Option<u8>,
    pub track: Track,
    /// Index of the next waypoint to capture; equals the waypoint count once
    /// the track is finished.
    pub track_index: usize,
    pub seq_counter: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SimEventKind {
    ObjectiveStarted,
    ObjectiveCompleted,
    FaultOnset,
    FaultCleared,
    BatteryLow,
    MissionComplete,
    Replanned,
    AbortStarted,
    Recovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t_ms: u64,
    pub kind: SimEventKind,
    pub vehicle_id: u8,
    pub objective_id: Option<u8>,
    pub detail: String,
}
