//! Geodesy, the mission-plan data model, lawnmower survey generation and
//! plan validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Meters per degree of latitude used by the flat-earth projection.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

/// Objective geometry must stay within this distance of the plan origin.
pub const PLAN_RADIUS_M: f64 = 20_000.0;

const MAX_LAT_OFFSET_DEG: f64 = 0.5;
const MAX_ENU_OFFSET_M: f64 = 50_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("point is {0:.4} degrees of latitude from the origin (limit 0.5)")]
    TooFarFromOrigin(f64),
    #[error("offset ({0:.1}, {1:.1}) m exceeds the projection limit")]
    EnuOutOfRange(f64, f64),
    #[error("survey spacing {spacing} m must be positive and at most the area height {height} m")]
    Spacing { spacing: f64, height: f64 },
    #[error("track needs at least two distinct waypoints")]
    DegenerateTrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(DomainError::Latitude(self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(DomainError::Longitude(self.lon));
        }
        Ok(())
    }
}

/// Local east/north offset in meters from a scenario origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuPoint {
    pub x: f64,
    pub y: f64,
}

impl EnuPoint {
    pub const ORIGIN: EnuPoint = EnuPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &EnuPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &EnuPoint) -> EnuPoint {
        EnuPoint::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    /// Compass bearing in degrees (0 = north, clockwise) from `self` to `other`.
    pub fn bearing_to(&self, other: &EnuPoint) -> f64 {
        let deg = (other.x - self.x).atan2(other.y - self.y).to_degrees();
        deg.rem_euclid(360.0)
    }
}

/// Equirectangular projection of `p` into the plane tangent at `origin`.
pub fn latlon_to_enu(origin: GeoPoint, p: GeoPoint) -> Result<EnuPoint, DomainError> {
    origin.validate()?;
    p.validate()?;
    let dlat = p.lat - origin.lat;
    if dlat.abs() >= MAX_LAT_OFFSET_DEG {
        return Err(DomainError::TooFarFromOrigin(dlat.abs()));
    }
    let y = dlat * METERS_PER_DEGREE;
    let x = (p.lon - origin.lon) * METERS_PER_DEGREE * origin.lat.to_radians().cos();
    Ok(EnuPoint { x, y })
}

/// Inverse of [`latlon_to_enu`] under the same origin.
pub fn enu_to_latlon(origin: GeoPoint, e: EnuPoint) -> Result<GeoPoint, DomainError> {
    origin.validate()?;
    if !(e.x.abs() < MAX_ENU_OFFSET_M && e.y.abs() < MAX_ENU_OFFSET_M) {
        return Err(DomainError::EnuOutOfRange(e.x, e.y));
    }
    let lat = origin.lat + e.y / METERS_PER_DEGREE;
    let lon = origin.lon + e.x / (METERS_PER_DEGREE * origin.lat.to_radians().cos());
    Ok(GeoPoint { lat, lon })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyArea {
    pub corner: GeoPoint,
    /// East extent before rotation.
    pub width_m: f64,
    /// North extent before rotation.
    pub height_m: f64,
    /// Counter-clockwise rotation about the corner.
    #[serde(default)]
    pub rotation_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveState {
    #[default]
    Pending,
    Active,
    Complete,
    Aborted,
}

impl ObjectiveState {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveState::Pending => "pending",
            ObjectiveState::Active => "active",
            ObjectiveState::Complete => "complete",
            ObjectiveState::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveKind {
    Survey { area: SurveyArea, spacing_m: f64 },
    Reacquire { target: GeoPoint },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    pub id: u8,
    pub name: String,
    pub kind: ObjectiveKind,
    #[serde(default)]
    pub state: ObjectiveState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionPlan {
    pub origin: GeoPoint,
    pub launch: GeoPoint,
    pub recovery: GeoPoint,
    pub objectives: Vec<Objective>,
    pub shore_station: GeoPoint,
}

impl MissionPlan {
    pub fn objective(&self, id: u8) -> Option<&Objective> {
        self.objectives.iter().find(|o| o.id == id)
    }

    pub fn objective_mut(&mut self, id: u8) -> Option<&mut Objective> {
        self.objectives.iter_mut().find(|o| o.id == id)
    }

    pub fn to_enu(&self, p: GeoPoint) -> Result<EnuPoint, DomainError> {
        latlon_to_enu(self.origin, p)
    }

    pub fn to_geo(&self, e: EnuPoint) -> Result<GeoPoint, DomainError> {
        enu_to_latlon(self.origin, e)
    }

    /// Waypoints an objective contributes to a route, in ENU.
    pub fn objective_waypoints(&self, objective: &Objective) -> Result<Vec<EnuPoint>, DomainError> {
        match &objective.kind {
            ObjectiveKind::Survey { area, spacing_m } => {
                Ok(generate_lawnmower(self.origin, area, *spacing_m)?.waypoints)
            }
            ObjectiveKind::Reacquire { target } => Ok(vec![self.to_enu(*target)?]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub waypoints: Vec<EnuPoint>,
}

impl Track {
    /// Builds a track, dropping consecutive duplicate points.
    pub fn from_points(points: impl IntoIterator<Item = EnuPoint>) -> Result<Track, DomainError> {
        let waypoints = dedup_consecutive(points);
        if waypoints.len() < 2 {
            return Err(DomainError::DegenerateTrack);
        }
        Ok(Track { waypoints })
    }

    pub fn length(&self) -> f64 {
        path_length(&self.waypoints)
    }
}

pub(crate) fn dedup_consecutive(points: impl IntoIterator<Item = EnuPoint>) -> Vec<EnuPoint> {
    let mut out: Vec<EnuPoint> = Vec::new();
    for p in points {
        if out.last().is_some_and(|last| last.distance(&p) < 1e-9) {
            continue;
        }
        out.push(p);
    }
    out
}

pub fn path_length(points: &[EnuPoint]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Leg offsets (across the area) of a boustrophedon pattern.
pub fn lawnmower_leg_offsets(height_m: f64, spacing_m: f64) -> Vec<f64> {
    let legs = (height_m / spacing_m).ceil() as usize;
    (0..legs).map(|i| ((i as f64 + 0.5) * spacing_m).min(height_m - spacing_m / 2.0)).collect()
}

/// Boustrophedon survey track with the area corner at the local origin.
pub fn lawnmower_local(
    width_m: f64,
    height_m: f64,
    rotation_deg: f64,
    spacing_m: f64,
) -> Result<Vec<EnuPoint>, DomainError> {
    if !(spacing_m > 0.0 && spacing_m <= height_m) {
        return Err(DomainError::Spacing { spacing: spacing_m, height: height_m });
    }
    let (sin, cos) = rotation_deg.to_radians().sin_cos();
    let rotate = |x: f64, y: f64| EnuPoint::new(x * cos - y * sin, x * sin + y * cos);
    let mut points = Vec::new();
    for (i, y) in lawnmower_leg_offsets(height_m, spacing_m).into_iter().enumerate() {
        let (start, end) = if i % 2 == 0 { (0.0, width_m) } else { (width_m, 0.0) };
        points.push(rotate(start, y));
        points.push(rotate(end, y));
    }
    Ok(points)
}

pub fn generate_lawnmower(origin: GeoPoint, area: &SurveyArea, spacing_m: f64) -> Result<Track, DomainError> {
    let corner = latlon_to_enu(origin, area.corner)?;
    let local = lawnmower_local(area.width_m, area.height_m, area.rotation_deg, spacing_m)?;
    Track::from_points(local.into_iter().map(|p| EnuPoint::new(p.x + corner.x, p.y + corner.y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    NoObjectives,
    DuplicateObjectiveId,
    InvalidObjectiveId,
    InvalidPoint,
    InvalidArea,
    InvalidSpacing,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

/// Checks every plan invariant and reports all violations; empty means valid.
pub fn validate_plan(plan: &MissionPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, path: String, message: String| out.push(Violation { code, path, message });

    for (name, p) in [
        ("origin", plan.origin),
        ("launch", plan.launch),
        ("recovery", plan.recovery),
        ("shore_station", plan.shore_station),
    ] {
        if let Err(e) = p.validate() {
            push(ViolationCode::InvalidPoint, name.to_string(), e.to_string());
        }
    }
    if plan.objectives.is_empty() {
        push(ViolationCode::NoObjectives, "objectives".into(), "plan has no objectives".into());
    }
    let origin_ok = plan.origin.validate().is_ok();
    let mut seen = std::collections::BTreeSet::new();
    for (i, obj) in plan.objectives.iter().enumerate() {
        let base = format!("objectives[{i}]");
        if !(1..=250).contains(&obj.id) {
            push(ViolationCode::InvalidObjectiveId, format!("{base}.id"), format!("id {} outside 1..=250", obj.id));
        }
        if !seen.insert(obj.id) {
            push(
                ViolationCode::DuplicateObjectiveId,
                format!("{base}.id"),
                format!("objective id {} repeated", obj.id),
            );
        }
        let mut geometry = Vec::new();
        match &obj.kind {
            ObjectiveKind::Survey { area, spacing_m } => {
                let area_ok = area.width_m > 0.0 && area.height_m > 0.0 && (0.0..360.0).contains(&area.rotation_deg);
                if !area_ok {
                    push(
                        ViolationCode::InvalidArea,
                        format!("{base}.kind.area"),
                        "area needs positive extents and rotation in [0, 360)".into(),
                    );
                }
                if !(*spacing_m > 0.0) || (area_ok && *spacing_m > area.height_m) {
                    push(
                        ViolationCode::InvalidSpacing,
                        format!("{base}.kind.spacing_m"),
                        format!("spacing {spacing_m} invalid for height {}", area.height_m),
                    );
                }
                if let Err(e) = area.corner.validate() {
                    push(ViolationCode::InvalidPoint, format!("{base}.kind.area.corner"), e.to_string());
                } else if origin_ok && area_ok {
                    if let Ok(corner) = latlon_to_enu(plan.origin, area.corner) {
                        let (sin, cos) = area.rotation_deg.to_radians().sin_cos();
                        for (x, y) in
                            [(0.0, 0.0), (area.width_m, 0.0), (area.width_m, area.height_m), (0.0, area.height_m)]
                        {
                            geometry.push(EnuPoint::new(corner.x + x * cos - y * sin, corner.y + x * sin + y * cos));
                        }
                    } else {
                        geometry.push(EnuPoint::new(f64::INFINITY, 0.0));
                    }
                }
            }
            ObjectiveKind::Reacquire { target } => {
                if let Err(e) = target.validate() {
                    push(ViolationCode::InvalidPoint, format!("{base}.kind.target"), e.to_string());
                } else if origin_ok {
                    match latlon_to_enu(plan.origin, *target) {
                        Ok(p) => geometry.push(p),
                        Err(_) => geometry.push(EnuPoint::new(f64::INFINITY, 0.0)),
                    }
                }
            }
        }
        if geometry.iter().any(|p| p.distance(&EnuPoint::ORIGIN) > PLAN_RADIUS_M) {
            push(
                ViolationCode::OutOfBounds,
                base.clone(),
                format!("objective {} lies beyond {PLAN_RADIUS_M} m of the origin", obj.id),
            );
        }
    }
    out
}
