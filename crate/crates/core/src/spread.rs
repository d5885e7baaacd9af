//! Discrete-time fire spread by expanding flame spheres over scene patches.
//!
//! Every flame source grows a sphere around its center. An unburned patch whose
//! centroid falls inside a source's sphere starts igniting and becomes burning
//! once its material's ignition delay has elapsed; a newly burning patch spawns
//! its own source at its centroid, expanding at that material's speed.
//!
//! The effective expansion speed in the direction `u` (unit vector from the
//! source to the patch centroid) is
//!
//! ```text
//! v_eff(u) = expansion_speed
//!          * clamp(1.5 - humidity / 100, 0.5, 1.5)
//!          * (1 + c_w * wind_speed * max(0, u . w))
//! ```
//!
//! with `w` the horizontal unit vector the wind blows towards and `c_w` in
//! 1 / (km/h). The environment is kept as a list of constant segments, so a
//! change only affects growth after it happens.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Patch, PatchId, PatchIndex, PatchedScene, Vec3};
use crate::math::{cos, sin, to_radians, Fnv64};

pub const DEFAULT_DT_S: f64 = 0.5;
pub const DEFAULT_WIND_COEFF: f64 = 0.02;
const REACH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpreadError {
    #[error("no material profile for tag {0:?}")]
    UnknownMaterial(String),
    #[error("ignition point {0:?} lies outside the scene bounds")]
    OutOfBounds(Vec3),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(&'static str),
    #[error("invalid material profile {0:?}")]
    InvalidMaterial(String),
    #[error("time step must be positive and finite")]
    BadTimeStep,
    #[error("unknown patch {0:?}")]
    UnknownPatch(PatchId),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MaterialProfile {
    pub tag: String,
    /// Seconds from first contact to burning. `f64::INFINITY` marks a non-flammable material.
    pub ignition_delay: f64,
    /// Meters per second.
    pub expansion_speed: f64,
}

impl MaterialProfile {
    pub fn new(tag: impl Into<String>, ignition_delay: f64, expansion_speed: f64) -> Result<Self, SpreadError> {
        let tag = tag.into();
        if !(ignition_delay >= 0.0) || !(expansion_speed > 0.0) || !expansion_speed.is_finite() {
            return Err(SpreadError::InvalidMaterial(tag));
        }
        Ok(Self {
            tag,
            ignition_delay,
            expansion_speed,
        })
    }

    pub fn is_flammable(&self) -> bool {
        self.ignition_delay.is_finite()
    }
}

/// Shipped defaults. These are tuning values, not measured properties.
pub fn default_materials() -> Vec<MaterialProfile> {
    vec![
        MaterialProfile {
            tag: "dry-vegetation".into(),
            ignition_delay: 2.0,
            expansion_speed: 0.3,
        },
        MaterialProfile {
            tag: "wood".into(),
            ignition_delay: 8.0,
            expansion_speed: 0.1,
        },
        MaterialProfile {
            tag: "concrete".into(),
            ignition_delay: f64::INFINITY,
            expansion_speed: 0.05,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Environment {
    /// Degrees Celsius.
    pub air_temp: f64,
    /// Percent, 0..=100.
    pub humidity: f64,
    /// km/h.
    pub wind_speed: f64,
    /// Degrees clockwise from north (+Y) the wind blows towards, 0..360.
    pub wind_direction: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            air_temp: 20.0,
            humidity: 50.0,
            wind_speed: 0.0,
            wind_direction: 0.0,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<(), SpreadError> {
        if !self.air_temp.is_finite() {
            return Err(SpreadError::InvalidEnvironment("air_temp must be finite"));
        }
        if !(0.0..=100.0).contains(&self.humidity) {
            return Err(SpreadError::InvalidEnvironment("humidity must be within [0, 100]"));
        }
        if !(self.wind_speed >= 0.0) || !self.wind_speed.is_finite() {
            return Err(SpreadError::InvalidEnvironment("wind_speed must be >= 0"));
        }
        if !(0.0..360.0).contains(&self.wind_direction) {
            return Err(SpreadError::InvalidEnvironment("wind_direction must be within [0, 360)"));
        }
        Ok(())
    }

    /// Horizontal unit vector the wind blows towards.
    pub fn wind_unit(&self) -> Vec3 {
        let a = to_radians(self.wind_direction);
        Vec3::new(sin(a), cos(a), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SpreadConfig {
    /// Wind gain per km/h.
    pub wind_coeff: f64,
    pub humidity_offset: f64,
    pub humidity_min_mult: f64,
    pub humidity_max_mult: f64,
}

impl Default for SpreadConfig {
    fn default() -> Self {
        Self {
            wind_coeff: DEFAULT_WIND_COEFF,
            humidity_offset: 1.5,
            humidity_min_mult: 0.5,
            humidity_max_mult: 1.5,
        }
    }
}

impl SpreadConfig {
    pub fn humidity_multiplier(&self, humidity: f64) -> f64 {
        (self.humidity_offset - humidity / 100.0).clamp(self.humidity_min_mult, self.humidity_max_mult)
    }

    /// Effective expansion speed of a source with `base_speed` along unit direction `dir`.
    pub fn effective_speed(&self, base_speed: f64, env: &Environment, dir: Vec3) -> f64 {
        let along = dir.dot(env.wind_unit()).max(0.0);
        base_speed * self.humidity_multiplier(env.humidity) * (1.0 + self.wind_coeff * env.wind_speed * along)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum PatchState {
    Unburned,
    Igniting { deadline: f64 },
    Burning { since: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum SourceOrigin {
    /// External ignition; the nearest patch is set burning at `ignite_time`.
    Ignition { seed: PatchId },
    /// Spawned by a patch that became burning.
    Patch(PatchId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FlameSource {
    pub id: u32,
    pub center: Vec3,
    pub ignite_time: f64,
    pub base_speed: f64,
    pub origin: SourceOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EnvSegment {
    start: f64,
    end: f64,
    env: Environment,
}

#[derive(Debug)]
struct PatchTable {
    patches: Vec<Patch>,
    material: Vec<usize>,
    index: PatchIndex,
    bounds: Aabb,
}

/// Mutable simulation state. Cloning is cheap: patch and material tables are shared.
#[derive(Debug, Clone)]
pub struct SpreadState {
    table: Arc<PatchTable>,
    materials: Arc<Vec<MaterialProfile>>,
    config: SpreadConfig,
    sim_time: f64,
    sources: Vec<FlameSource>,
    seeded: Vec<bool>,
    retired: Vec<bool>,
    patch_state: Vec<PatchState>,
    segments: Vec<EnvSegment>,
    burning_area: f64,
    series: Vec<(f64, f64)>,
}

impl SpreadState {
    /// Sets up a simulation with one source per ignition `(point, time)`.
    pub fn init(
        scene: &PatchedScene,
        materials: &[MaterialProfile],
        ignitions: &[(Vec3, f64)],
        env: Environment,
        config: SpreadConfig,
    ) -> Result<Self, SpreadError> {
        env.validate()?;
        for m in materials {
            MaterialProfile::new(m.tag.clone(), m.ignition_delay, m.expansion_speed)?;
        }
        let patches = scene.patches().to_vec();
        let material = patches
            .iter()
            .map(|p| {
                materials
                    .iter()
                    .position(|m| m.tag == p.material_tag)
                    .ok_or_else(|| SpreadError::UnknownMaterial(p.material_tag.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let index = scene.tessellation().index().clone();
        let n = patches.len();
        let table = Arc::new(PatchTable {
            patches,
            material,
            index,
            bounds: scene.scene().bounds(),
        });
        let start = ignitions.iter().map(|&(_, t)| t).fold(f64::INFINITY, f64::min);
        let start = if start.is_finite() { start } else { 0.0 };
        let mut state = SpreadState {
            table,
            materials: Arc::new(materials.to_vec()),
            config,
            sim_time: start,
            sources: Vec::new(),
            seeded: Vec::new(),
            retired: Vec::new(),
            patch_state: vec![PatchState::Unburned; n],
            segments: vec![EnvSegment { start, end: start, env }],
            burning_area: 0.0,
            series: Vec::new(),
        };
        for &(p, t) in ignitions {
            state.ignite(p, t)?;
        }
        Ok(state)
    }

    /// Adds an external ignition at `point`, becoming active at `time`.
    pub fn ignite(&mut self, point: Vec3, time: f64) -> Result<u32, SpreadError> {
        if !point.is_finite() || !self.table.bounds.contains(point, 1e-9) {
            return Err(SpreadError::OutOfBounds(point));
        }
        if !time.is_finite() {
            return Err(SpreadError::BadTimeStep);
        }
        let seed = self
            .table
            .patches
            .iter()
            .min_by(|a, b| {
                (a.centroid - point)
                    .length_squared()
                    .total_cmp(&(b.centroid - point).length_squared())
                    .then(a.id.cmp(&b.id))
            })
            .map(|p| p.id)
            .ok_or(SpreadError::OutOfBounds(point))?;
        let speed = self.material_of(seed).expansion_speed;
        Ok(self.push_source(point, time, speed, SourceOrigin::Ignition { seed }))
    }

    fn push_source(&mut self, center: Vec3, time: f64, base_speed: f64, origin: SourceOrigin) -> u32 {
        let id = self.sources.len() as u32;
        self.sources.push(FlameSource {
            id,
            center,
            ignite_time: time,
            base_speed,
            origin,
        });
        self.seeded.push(!matches!(origin, SourceOrigin::Ignition { .. }));
        self.retired.push(false);
        id
    }

    fn material_of(&self, id: PatchId) -> &MaterialProfile {
        &self.materials[self.table.material[id.index()]]
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn env(&self) -> Environment {
        self.segments.last().map(|s| s.env).unwrap_or_default()
    }

    pub fn config(&self) -> &SpreadConfig {
        &self.config
    }

    pub fn sources(&self) -> &[FlameSource] {
        &self.sources
    }

    pub fn patches(&self) -> &[Patch] {
        &self.table.patches
    }

    pub fn patch_states(&self) -> &[PatchState] {
        &self.patch_state
    }

    pub fn patch_state(&self, id: PatchId) -> Result<PatchState, SpreadError> {
        self.patch_state.get(id.index()).copied().ok_or(SpreadError::UnknownPatch(id))
    }

    pub fn burning_area(&self) -> f64 {
        self.burning_area
    }

    /// Subsequent steps use `env`; growth already accumulated is untouched.
    pub fn set_environment(&mut self, env: Environment) -> Result<(), SpreadError> {
        env.validate()?;
        let now = self.sim_time;
        let last = self.segments.last_mut().expect("at least one segment");
        if last.env == env {
            return Ok(());
        }
        if last.end <= last.start {
            last.env = env;
        } else {
            self.segments.push(EnvSegment { start: now, end: now, env });
        }
        Ok(())
    }

    /// Radius coefficients of a source at time `t`: `r(u) = iso + sum_k gain_k * max(0, u . w_k)`.
    fn reach_terms(&self, source: &FlameSource, t: f64, out: &mut Vec<(f64, Vec3)>) -> f64 {
        out.clear();
        let mut iso = 0.0;
        for seg in &self.segments {
            let a = seg.start.max(source.ignite_time);
            let b = seg.end.min(t);
            if b <= a {
                continue;
            }
            let base = source.base_speed * self.config.humidity_multiplier(seg.env.humidity) * (b - a);
            iso += base;
            let gain = base * self.config.wind_coeff * seg.env.wind_speed;
            if gain > 0.0 {
                out.push((gain, seg.env.wind_unit()));
            }
        }
        iso
    }

    /// Largest directional radius of a source at the current time.
    pub fn source_max_radius(&self, source: &FlameSource) -> f64 {
        let mut terms = Vec::new();
        let iso = self.reach_terms(source, self.sim_time, &mut terms);
        iso + terms.iter().map(|(g, _)| g).sum::<f64>()
    }

    /// Radius of a source towards `point` at the current time.
    pub fn source_radius_towards(&self, source: &FlameSource, point: Vec3) -> f64 {
        let mut terms = Vec::new();
        let iso = self.reach_terms(source, self.sim_time, &mut terms);
        let dir = (point - source.center).normalized().unwrap_or(Vec3::ZERO);
        iso + terms.iter().map(|(g, w)| g * dir.dot(*w).max(0.0)).sum::<f64>()
    }

    /// Active flame spheres `(center, max radius)` at the current time.
    pub fn flame_spheres(&self) -> Vec<(Vec3, f64)> {
        self.sources
            .iter()
            .filter(|s| s.ignite_time <= self.sim_time)
            .map(|s| (s.center, self.source_max_radius(s)))
            .collect()
    }

    /// Advances the simulation by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> Result<(), SpreadError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SpreadError::BadTimeStep);
        }
        let t1 = self.sim_time + dt;
        if let Some(last) = self.segments.last_mut() {
            last.end = t1;
        }

        // External ignitions set their seed patch burning at their own time.
        for i in 0..self.sources.len() {
            if self.seeded[i] || self.sources[i].ignite_time > t1 {
                continue;
            }
            self.seeded[i] = true;
            let src = self.sources[i];
            if let SourceOrigin::Ignition { seed } = src.origin {
                if self.material_of(seed).is_flammable()
                    && !matches!(self.patch_state[seed.index()], PatchState::Burning { .. })
                {
                    self.patch_state[seed.index()] = PatchState::Burning { since: src.ignite_time };
                    self.burning_area += self.table.patches[seed.index()].area;
                }
            }
        }

        // Contact: unburned centroids inside any active sphere start igniting.
        let mut entering = vec![false; self.patch_state.len()];
        let mut terms = Vec::new();
        let far = self.table.bounds.diagonal();
        for i in 0..self.sources.len() {
            let src = self.sources[i];
            if self.retired[i] || src.ignite_time > t1 {
                continue;
            }
            let iso = self.reach_terms(&src, t1, &mut terms);
            let max_r = iso + terms.iter().map(|(g, _)| g).sum::<f64>();
            for id in self.table.index.within_sphere(&self.table.patches, src.center, max_r + REACH_EPS) {
                if entering[id.index()] || self.patch_state[id.index()] != PatchState::Unburned {
                    continue;
                }
                let offset = self.table.patches[id.index()].centroid - src.center;
                let dist = offset.length();
                let reach = if dist > 0.0 {
                    let dir = offset / dist;
                    iso + terms.iter().map(|(g, w)| g * dir.dot(*w).max(0.0)).sum::<f64>()
                } else {
                    iso
                };
                if dist <= reach + REACH_EPS {
                    entering[id.index()] = true;
                }
            }
            // Once the slowest direction spans the whole scene nothing new can be reached.
            if iso >= far + distance_to_box(src.center, &self.table.bounds) {
                self.retired[i] = true;
            }
        }
        for (idx, hit) in entering.iter().enumerate() {
            if *hit {
                let delay = self.materials[self.table.material[idx]].ignition_delay;
                self.patch_state[idx] = PatchState::Igniting { deadline: t1 + delay };
            }
        }

        // Ignition: igniting patches past their deadline burn and spawn a source.
        for idx in 0..self.patch_state.len() {
            if let PatchState::Igniting { deadline } = self.patch_state[idx] {
                if deadline <= t1 + REACH_EPS {
                    self.patch_state[idx] = PatchState::Burning { since: t1 };
                    let patch = &self.table.patches[idx];
                    self.burning_area += patch.area;
                    let (center, id) = (patch.centroid, patch.id);
                    let speed = self.materials[self.table.material[idx]].expansion_speed;
                    self.push_source(center, t1, speed, SourceOrigin::Patch(id));
                }
            }
        }

        self.sim_time = t1;
        self.series.push((t1, self.burning_area));
        Ok(())
    }

    /// Steps with `dt` until `sim_time` reaches `until` (the last step may overshoot by < dt).
    pub fn run_until(&mut self, until: f64, dt: f64) -> Result<(), SpreadError> {
        if !(dt > 0.0) {
            return Err(SpreadError::BadTimeStep);
        }
        while self.sim_time < until - 1e-9 {
            self.step(dt)?;
        }
        Ok(())
    }

    /// Time the patch became burning, `None` if it has not.
    pub fn arrival_time(&self, id: PatchId) -> Result<Option<f64>, SpreadError> {
        match self.patch_state(id)? {
            PatchState::Burning { since } => Ok(Some(since)),
            _ => Ok(None),
        }
    }

    /// Arrival time of every patch, indexed by patch id.
    pub fn arrival_map(&self) -> Vec<Option<f64>> {
        self.patch_state
            .iter()
            .map(|s| match s {
                PatchState::Burning { since } => Some(*since),
                _ => None,
            })
            .collect()
    }

    /// `(time, cumulative burning area)` after every step.
    pub fn growth_series(&self) -> &[(f64, f64)] {
        &self.series
    }

    /// Burning area per step, without timestamps.
    pub fn growth_values(&self) -> Vec<f64> {
        self.series.iter().map(|&(_, a)| a).collect()
    }

    /// Deterministic fingerprint of the full dynamic state.
    pub fn state_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write_f64(self.sim_time);
        for s in &self.patch_state {
            match *s {
                PatchState::Unburned => h.write(&[0]),
                PatchState::Igniting { deadline } => {
                    h.write(&[1]);
                    h.write_f64(deadline);
                }
                PatchState::Burning { since } => {
                    h.write(&[2]);
                    h.write_f64(since);
                }
            }
        }
        for s in &self.sources {
            h.write_f64(s.center.x);
            h.write_f64(s.center.y);
            h.write_f64(s.center.z);
            h.write_f64(s.ignite_time);
            h.write_f64(s.base_speed);
        }
        for &(t, a) in &self.series {
            h.write_f64(t);
            h.write_f64(a);
        }
        h.finish()
    }
}

fn distance_to_box(p: Vec3, b: &Aabb) -> f64 {
    let d = Vec3::new(
        (b.min.x - p.x).max(0.0).max(p.x - b.max.x),
        (b.min.y - p.y).max(0.0).max(p.y - b.max.y),
        (b.min.z - p.z).max(0.0).max(p.z - b.max.z),
    );
    d.length()
}
