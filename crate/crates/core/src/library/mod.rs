//! Scenario library: precomputed incidents with ranked response plans, and the
//! similarity engine that matches a live status log against them.

mod precompute;
mod similarity;

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::spread::SpreadError;
use crate::status::{ResourceKind, StatusLog};

pub use precompute::{
    precompute_library, ActionTemplate, BaseFeatures, GridMaterial, ParamGrid, PlanTemplate, TargetTemplate,
};
pub use similarity::{
    dtw, growth_rates, match_features, match_status, resample, static_distance, FeatureWeights, MatchConfig,
    Normalization,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LibraryError {
    #[error("feature weights must be non-negative and sum to 1")]
    BadWeights,
    #[error("series must be non-empty")]
    EmptySeries,
    #[error("scenario library is empty")]
    EmptyLibrary,
    #[error("k must be at least 1")]
    BadK,
    #[error("parameter grid has an empty dimension")]
    EmptyGrid,
    #[error("no plan template applies to scenario {0}")]
    NoApplicablePlan(String),
    #[error("invalid scenario {id}: {reason}")]
    InvalidScenario { id: String, reason: &'static str },
    #[error(transparent)]
    Spread(#[from] SpreadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Severity {
    #[default]
    Low = 0,
    Medium = 1,
    High = 2,
}

impl Severity {
    pub fn ordinal(self) -> f64 {
        self as u8 as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum MaterialClass {
    ForestDryVegetation,
    UrbanIndustrial,
    IndoorResidential,
}

/// Objects detected in the fire's path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ObjectFlags {
    #[cfg_attr(feature = "serde", serde(default))]
    pub trees: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub power_lines: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub structures: bool,
}

impl ObjectFlags {
    fn bits(self) -> u8 {
        u8::from(self.trees) | u8::from(self.power_lines) << 1 | u8::from(self.structures) << 2
    }

    pub fn is_empty(self) -> bool {
        self.bits() == 0
    }

    /// 1 - |A & B| / |A | B|, zero when both are empty.
    pub fn jaccard_distance(self, other: ObjectFlags) -> f64 {
        let (a, b) = (self.bits(), other.bits());
        let union = (a | b).count_ones();
        if union == 0 {
            return 0.0;
        }
        1.0 - f64::from((a & b).count_ones()) / f64::from(union)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeatureVector {
    pub severity: Severity,
    pub responders: u32,
    pub fire_trucks: u32,
    pub helicopters: u32,
    pub ambulances: u32,
    pub material_class: Option<MaterialClass>,
    /// km/h
    pub wind_speed: f64,
    /// Degrees, 0..360.
    pub wind_direction: f64,
    /// km/h
    pub spread_rate: f64,
    /// Degrees Celsius.
    pub max_temp: f64,
    pub objects_in_path: ObjectFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum ActionKind {
    DeployCrew,
    DeployTruck,
    AerialDrop,
    DeployDrone,
    EvacuateZone,
    ActivateSprinklers,
}

impl ActionKind {
    /// Resource consumed by the action, if any.
    pub fn resource(self) -> Option<ResourceKind> {
        match self {
            ActionKind::DeployCrew => Some(ResourceKind::Firefighter),
            ActionKind::DeployTruck => Some(ResourceKind::FireTruck),
            ActionKind::AerialDrop => Some(ResourceKind::Helicopter),
            ActionKind::DeployDrone => Some(ResourceKind::Drone),
            ActionKind::EvacuateZone | ActionKind::ActivateSprinklers => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Target {
    Point(Vec3),
    Zone(String),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Action {
    pub kind: ActionKind,
    pub target: Target,
    pub quantity: u32,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct InterventionPlan {
    pub id: String,
    pub actions: Vec<Action>,
    pub effectiveness: f64,
    pub cost_efficiency: f64,
    pub response_speed: f64,
}

impl InterventionPlan {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.actions.is_empty() {
            return Err("plan has no actions");
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.effectiveness) && unit(self.cost_efficiency) && unit(self.response_speed)) {
            return Err("plan scores must lie in [0, 1]");
        }
        Ok(())
    }

    /// Clamps resource-consuming quantities to what the status log reports available.
    /// Kinds the register does not track are left as authored.
    pub fn tuned_to(&self, status: &StatusLog) -> InterventionPlan {
        let mut plan = self.clone();
        for a in &mut plan.actions {
            if let Some(kind) = a.kind.resource() {
                if status.tracks(kind) {
                    a.quantity = a.quantity.min(status.available(kind));
                }
            }
        }
        plan
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenarioRecord {
    pub id: String,
    pub features: FeatureVector,
    /// Cumulative burning area per tick, m^2.
    pub growth: Vec<f64>,
    pub plans: Vec<InterventionPlan>,
}

impl ScenarioRecord {
    pub fn validate(&self) -> Result<(), LibraryError> {
        let bad = |reason| LibraryError::InvalidScenario {
            id: self.id.clone(),
            reason,
        };
        if self.plans.is_empty() {
            return Err(bad("scenario needs at least one plan"));
        }
        if self.growth.windows(2).any(|w| w[1] < w[0]) {
            return Err(bad("growth series must be non-decreasing"));
        }
        for p in &self.plans {
            p.validate().map_err(bad)?;
        }
        if !(0.0..360.0).contains(&self.features.wind_direction) {
            return Err(bad("wind_direction must be within [0, 360)"));
        }
        Ok(())
    }

    pub fn plan(&self, plan_id: &str) -> Option<&InterventionPlan> {
        self.plans.iter().find(|p| p.id == plan_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MatchResult {
    pub scenario_id: String,
    pub static_distance: f64,
    pub temporal_distance: f64,
    pub combined: f64,
}

/// Features of the live incident.
///
/// Severity is the status log's alert level, counts are available units from
/// the resource register, wind comes from the environment, max temperature is
/// the hottest fire reading (or the air temperature when hotter). The spread
/// rate is the observed value when present, otherwise the growth of the
/// equivalent-circle radius of the simulated burning area.
pub fn featurize(status: &StatusLog) -> FeatureVector {
    let max_event = status
        .fire_events
        .iter()
        .map(|e| e.peak_temp)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_temp = if status.fire_events.is_empty() {
        status.env.air_temp
    } else {
        max_event.max(status.env.air_temp)
    };
    let spread_rate = status.observed_spread_rate.unwrap_or_else(|| {
        status
            .spread
            .as_ref()
            .map_or(0.0, |s| equivalent_spread_rate_kmh(&s.growth, s.start_time))
    });
    FeatureVector {
        severity: status.alert_level,
        responders: status.available(ResourceKind::Firefighter),
        fire_trucks: status.available(ResourceKind::FireTruck),
        helicopters: status.available(ResourceKind::Helicopter),
        ambulances: status.available(ResourceKind::Ambulance),
        material_class: status.material_class,
        wind_speed: status.env.wind_speed,
        wind_direction: status.env.wind_direction,
        spread_rate,
        max_temp,
        objects_in_path: status.objects_in_path,
    }
}

/// Spread rate in km/h of a circle with the final burning area, over the elapsed time.
pub fn equivalent_spread_rate_kmh(growth: &[(f64, f64)], start_time: f64) -> f64 {
    let Some(&(t, area)) = growth.last() else {
        return 0.0;
    };
    let elapsed = t - start_time;
    if elapsed <= 0.0 || area <= 0.0 {
        return 0.0;
    }
    crate::math::sqrt(area / core::f64::consts::PI) / elapsed * 3.6
}
