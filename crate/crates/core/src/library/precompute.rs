use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{
    equivalent_spread_rate_kmh, Action, ActionKind, FeatureVector, InterventionPlan, LibraryError, MaterialClass,
    ObjectFlags, ScenarioRecord, Severity, Target,
};
use crate::geometry::{PatchedScene, Vec3};
use crate::spread::{Environment, MaterialProfile, SpreadConfig, SpreadState};

/// One material regime of the grid: a site class and the profiles its surfaces burn with.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GridMaterial {
    pub class: MaterialClass,
    pub profiles: Vec<MaterialProfile>,
}

/// Features shared by every scenario of a grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BaseFeatures {
    #[cfg_attr(feature = "serde", serde(default))]
    pub responders: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub fire_trucks: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub helicopters: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub ambulances: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub objects_in_path: ObjectFlags,
    /// Degrees Celsius recorded as the scenario's peak.
    pub max_temp: f64,
}

impl Default for BaseFeatures {
    fn default() -> Self {
        Self {
            responders: 0,
            fire_trucks: 0,
            helicopters: 0,
            ambulances: 0,
            objects_in_path: ObjectFlags::default(),
            max_temp: 70.0,
        }
    }
}

#[cfg(feature = "serde")]
fn default_dt() -> f64 {
    crate::spread::DEFAULT_DT_S
}
#[cfg(feature = "serde")]
fn default_air_temp() -> f64 {
    20.0
}
#[cfg(feature = "serde")]
fn default_medium() -> f64 {
    0.1
}
#[cfg(feature = "serde")]
fn default_high() -> f64 {
    0.4
}

/// Cartesian parameter grid: one scenario per (wind, humidity, material, ignition site).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ParamGrid {
    /// `(speed km/h, direction degrees)`.
    pub winds: Vec<(f64, f64)>,
    /// Percent.
    pub humidities: Vec<f64>,
    pub materials: Vec<GridMaterial>,
    pub ignition_sites: Vec<Vec3>,
    /// Simulated seconds per scenario.
    pub horizon_s: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_dt"))]
    pub dt_s: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_air_temp"))]
    pub air_temp: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub base: BaseFeatures,
    /// Burnt fraction of the flammable area at which a scenario counts as medium severity.
    #[cfg_attr(feature = "serde", serde(default = "default_medium"))]
    pub medium_fraction: f64,
    /// Burnt fraction at which it counts as high severity.
    #[cfg_attr(feature = "serde", serde(default = "default_high"))]
    pub high_fraction: f64,
}

impl ParamGrid {
    pub fn len(&self) -> usize {
        self.winds.len() * self.humidities.len() * self.materials.len() * self.ignition_sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum TargetTemplate {
    Point(Vec3),
    Zone(String),
    /// The scenario's ignition site.
    IgnitionSite,
    /// The ignition site shifted by an offset.
    IgnitionOffset(Vec3),
}

impl TargetTemplate {
    fn instantiate(&self, site: Vec3) -> Target {
        match self {
            TargetTemplate::Point(p) => Target::Point(*p),
            TargetTemplate::Zone(z) => Target::Zone(z.clone()),
            TargetTemplate::IgnitionSite => Target::Point(site),
            TargetTemplate::IgnitionOffset(d) => Target::Point(site + *d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ActionTemplate {
    pub kind: ActionKind,
    pub target: TargetTemplate,
    pub quantity: u32,
}

/// Hand-authored plan; its three scores are configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlanTemplate {
    pub id: String,
    pub actions: Vec<ActionTemplate>,
    pub effectiveness: f64,
    pub cost_efficiency: f64,
    pub response_speed: f64,
    /// Material classes the plan applies to; empty means all.
    #[cfg_attr(feature = "serde", serde(default))]
    pub classes: Vec<MaterialClass>,
}

impl PlanTemplate {
    fn applies_to(&self, class: MaterialClass) -> bool {
        self.classes.is_empty() || self.classes.contains(&class)
    }

    fn instantiate(&self, site: Vec3) -> InterventionPlan {
        InterventionPlan {
            id: self.id.clone(),
            actions: self
                .actions
                .iter()
                .map(|a| Action {
                    kind: a.kind,
                    target: a.target.instantiate(site),
                    quantity: a.quantity,
                })
                .collect(),
            effectiveness: self.effectiveness,
            cost_efficiency: self.cost_efficiency,
            response_speed: self.response_speed,
        }
    }
}

fn severity_of(fraction: f64, grid: &ParamGrid) -> Severity {
    if fraction >= grid.high_fraction {
        Severity::High
    } else if fraction >= grid.medium_fraction {
        Severity::Medium
    } else {
        Severity::Low
    }
}

/// Simulates every grid point and attaches the applicable plans.
///
/// Scenario ids are `scn-NNNNN` in grid order (wind, then humidity, then
/// material, then ignition site, the last varying fastest).
pub fn precompute_library(
    scene: &PatchedScene,
    grid: &ParamGrid,
    templates: &[PlanTemplate],
) -> Result<Vec<ScenarioRecord>, LibraryError> {
    if grid.is_empty() {
        return Err(LibraryError::EmptyGrid);
    }
    let mut out = Vec::with_capacity(grid.len());
    for &(wind_speed, wind_direction) in &grid.winds {
        for &humidity in &grid.humidities {
            for material in &grid.materials {
                let flammable_area: f64 = scene
                    .patches()
                    .iter()
                    .filter(|p| {
                        material
                            .profiles
                            .iter()
                            .any(|m| m.tag == p.material_tag && m.is_flammable())
                    })
                    .map(|p| p.area)
                    .sum();
                for &site in &grid.ignition_sites {
                    let id = format!("scn-{:05}", out.len());
                    let env = Environment {
                        air_temp: grid.air_temp,
                        humidity,
                        wind_speed,
                        wind_direction,
                    };
                    let mut sim = SpreadState::init(
                        scene,
                        &material.profiles,
                        &[(site, 0.0)],
                        env,
                        SpreadConfig::default(),
                    )?;
                    sim.run_until(grid.horizon_s, grid.dt_s)?;
                    let fraction = if flammable_area > 0.0 {
                        sim.burning_area() / flammable_area
                    } else {
                        0.0
                    };
                    let plans: Vec<InterventionPlan> = templates
                        .iter()
                        .filter(|t| t.applies_to(material.class))
                        .map(|t| t.instantiate(site))
                        .collect();
                    if plans.is_empty() {
                        return Err(LibraryError::NoApplicablePlan(id));
                    }
                    let features = FeatureVector {
                        severity: severity_of(fraction, grid),
                        responders: grid.base.responders,
                        fire_trucks: grid.base.fire_trucks,
                        helicopters: grid.base.helicopters,
                        ambulances: grid.base.ambulances,
                        material_class: Some(material.class),
                        wind_speed,
                        wind_direction,
                        spread_rate: equivalent_spread_rate_kmh(sim.growth_series(), 0.0),
                        max_temp: grid.base.max_temp,
                        objects_in_path: grid.base.objects_in_path,
                    };
                    let record = ScenarioRecord {
                        id,
                        features,
                        growth: sim.growth_values(),
                        plans,
                    };
                    record.validate()?;
                    out.push(record);
                }
            }
        }
    }
    Ok(out)
}
