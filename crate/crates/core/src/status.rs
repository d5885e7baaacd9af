//! Live status log: what the twin currently knows about the incident and the
//! response assets available to it.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::incident::Timestamp;
use crate::library::{MaterialClass, ObjectFlags, Severity};
use crate::localization::FireEvent;
use crate::spread::{Environment, SpreadState};

/// Peak temperature (degrees Celsius) at or above which an incident is high severity.
pub const DEFAULT_HIGH_ALERT_TEMP: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum ResourceKind {
    Firefighter,
    FireTruck,
    Helicopter,
    Ambulance,
    Drone,
    WaterTank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Availability {
    Available,
    Deployed,
    OutOfService,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ResourceEntry {
    pub kind: ResourceKind,
    pub count: u32,
    pub position: Option<Vec3>,
    pub availability: Availability,
}

/// Spread summary carried in the status log.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SpreadSnapshot {
    pub sim_time: f64,
    /// Earliest ignition time.
    pub start_time: f64,
    pub burning_area: f64,
    /// `(time, cumulative burning area)` per tick.
    pub growth: Vec<(f64, f64)>,
    /// Active flame spheres `(center, max radius)`.
    pub flames: Vec<(Vec3, f64)>,
}

impl SpreadSnapshot {
    pub fn of(state: &SpreadState) -> Self {
        let start_time = state
            .sources()
            .iter()
            .map(|s| s.ignite_time)
            .fold(f64::INFINITY, f64::min);
        Self {
            sim_time: state.sim_time(),
            start_time: if start_time.is_finite() { start_time } else { state.sim_time() },
            burning_area: state.burning_area(),
            growth: state.growth_series().to_vec(),
            flames: state.flame_spheres(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OutcomeEntry {
    pub ticket_id: u64,
    pub success: bool,
    pub note: String,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StatusLog {
    pub fire_events: Vec<FireEvent>,
    pub spread: Option<SpreadSnapshot>,
    pub env: Environment,
    pub resources: Vec<ResourceEntry>,
    pub alert_level: Severity,
    /// Site classification, supplied by configuration.
    pub material_class: Option<MaterialClass>,
    pub objects_in_path: ObjectFlags,
    /// Observed spread rate in km/h, when an external estimate is available.
    pub observed_spread_rate: Option<f64>,
    pub outcomes: Vec<OutcomeEntry>,
}

impl StatusLog {
    /// Available units of one kind.
    pub fn available(&self, kind: ResourceKind) -> u32 {
        self.resources
            .iter()
            .filter(|r| r.kind == kind && r.availability == Availability::Available)
            .map(|r| r.count)
            .sum()
    }

    /// Whether the register tracks this kind at all.
    pub fn tracks(&self, kind: ResourceKind) -> bool {
        self.resources.iter().any(|r| r.kind == kind)
    }

    /// First available position of a resource kind.
    pub fn position_of(&self, kind: ResourceKind) -> Option<Vec3> {
        self.resources
            .iter()
            .filter(|r| r.kind == kind && r.availability == Availability::Available)
            .find_map(|r| r.position)
    }
}

/// Alert level from the current fire events: none is low, any fire is medium,
/// a "fire hazard" threat or a reading at or above `high_temp` is high.
pub fn derive_alert_level(events: &[FireEvent], high_temp: f64) -> Severity {
    if events.is_empty() {
        return Severity::Low;
    }
    let high = events
        .iter()
        .any(|e| e.threat_level == "fire hazard" || e.peak_temp >= high_temp);
    if high {
        Severity::High
    } else {
        Severity::Medium
    }
}
