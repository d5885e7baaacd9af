//! The live twin: scene, sensors, detection log, status log, spread
//! simulation, scenario library and command desk behind one owner.
//!
//! Every mutating call queues the stream events it caused; the gateway drains
//! them with [`Twin::take_events`].

use ivsr_core::command::{
    recommend, CommandDesk, CommandError, CommandTicket, Decision, DispatchContext, RecommendWeights, RouteConfig,
    Verdict,
};
use ivsr_core::geometry::{PatchId, PatchedScene, Scene, SurfaceId};
use ivsr_core::incident::{DetectionRecord, RecordId, ReplayEvent, Timestamp};
use ivsr_core::library::{match_status, InterventionPlan, LibraryError, MatchConfig, MatchResult, ScenarioRecord};
use ivsr_core::localization::{
    localize, merge_events, FireEvent, DEFAULT_MERGE_RADIUS_M, DEFAULT_MERGE_WINDOW_S,
};
use ivsr_core::spread::{Environment, MaterialProfile, SpreadConfig, SpreadError, SpreadState, DEFAULT_DT_S};
use ivsr_core::status::{derive_alert_level, ResourceKind, SpreadSnapshot, StatusLog, DEFAULT_HIGH_ALERT_TEMP};
use ivsr_core::Vec3;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::files::{SensorBindings, SiteDoc};
use crate::store::{IncidentStore, StoreError};
use crate::wire::{parse_detection, WireError};

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Detection,
    FireEvent,
    SpreadTick,
    Recommendation,
    TicketTransition,
    Replay,
}

#[derive(Debug, thiserror::Error)]
pub enum TwinError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("record {record_id:?} stored but not localized: {reason}")]
    NotLocalized { record_id: RecordId, reason: String },
    #[error(transparent)]
    Spread(#[from] SpreadError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error("plan {0:?} is not among the current recommendations")]
    UnknownPlan(String),
    #[error("{0}")]
    BadRequest(String),
}

#[derive(Debug, Clone)]
pub struct TwinConfig {
    pub merge_radius: f64,
    pub merge_window: f64,
    pub high_alert_temp: f64,
    pub dt: f64,
    pub spread: SpreadConfig,
    pub matching: MatchConfig,
    pub weights: RecommendWeights,
    pub route: RouteConfig,
    /// Matches kept for the recommendations pushed on every status change.
    pub k: usize,
}

impl Default for TwinConfig {
    fn default() -> Self {
        Self {
            merge_radius: DEFAULT_MERGE_RADIUS_M,
            merge_window: DEFAULT_MERGE_WINDOW_S,
            high_alert_temp: DEFAULT_HIGH_ALERT_TEMP,
            dt: DEFAULT_DT_S,
            spread: SpreadConfig::default(),
            matching: MatchConfig::default(),
            weights: RecommendWeights::default(),
            route: RouteConfig::default(),
            k: DEFAULT_K,
        }
    }
}

/// Ranked plans for the live incident. `reason` is set when there is nothing to rank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendations {
    pub matches: Vec<MatchResult>,
    pub recommendations: Vec<ivsr_core::command::Recommendation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ingested {
    pub record_id: RecordId,
    pub event_id: u64,
    /// Whether the event joined an existing fire instead of starting a new one.
    pub merged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalEntry {
    pub patch_id: PatchId,
    pub surface_id: SurfaceId,
    pub centroid: Vec3,
    pub arrival_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub from: f64,
    pub until: f64,
    pub burning_area: f64,
    pub arrival_map: Vec<ArrivalEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatusView<'a> {
    pub sim_time: f64,
    #[serde(flatten)]
    pub status: &'a StatusLog,
    pub tickets: Vec<&'a CommandTicket>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct EnvironmentUpdate {
    pub air_temp: f64,
    pub humidity: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
}

#[derive(Debug)]
pub struct Twin {
    scene: PatchedScene,
    sensors: SensorBindings,
    materials: Vec<MaterialProfile>,
    library: Vec<ScenarioRecord>,
    store: IncidentStore,
    status: StatusLog,
    raw_events: Vec<FireEvent>,
    spread: Option<SpreadState>,
    desk: CommandDesk,
    config: TwinConfig,
    drone_base: Option<Vec3>,
    sim_time: f64,
    next_event_id: u64,
    latest: Option<Recommendations>,
    outbox: Vec<(StreamKind, Value)>,
}

pub fn wall_clock() -> Timestamp {
    Timestamp::from_micros(chrono::Utc::now().naive_utc().and_utc().timestamp_micros())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl Twin {
    pub fn new(
        scene: PatchedScene,
        sensors: SensorBindings,
        materials: Vec<MaterialProfile>,
        library: Vec<ScenarioRecord>,
        store: IncidentStore,
        site: SiteDoc,
        config: TwinConfig,
    ) -> Result<Self, TwinError> {
        // fail early on a material table that does not cover the scene
        SpreadState::init(&scene, &materials, &[], Environment::default(), config.spread)?;
        let desk = CommandDesk::for_library(&library);
        let status = StatusLog {
            resources: site.resources,
            material_class: site.material_class,
            objects_in_path: site.objects_in_path,
            ..StatusLog::default()
        };
        Ok(Self {
            scene,
            sensors,
            materials,
            library,
            store,
            status,
            raw_events: Vec::new(),
            spread: None,
            desk,
            config,
            drone_base: site.drone_base,
            sim_time: 0.0,
            next_event_id: 1,
            latest: None,
            outbox: Vec::new(),
        })
    }

    pub fn scene(&self) -> &PatchedScene {
        &self.scene
    }

    pub fn store(&self) -> &IncidentStore {
        &self.store
    }

    pub fn status(&self) -> &StatusLog {
        &self.status
    }

    pub fn desk(&self) -> &CommandDesk {
        &self.desk
    }

    pub fn library(&self) -> &[ScenarioRecord] {
        &self.library
    }

    pub fn spread(&self) -> Option<&SpreadState> {
        self.spread.as_ref()
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn status_view(&self) -> StatusView<'_> {
        StatusView {
            sim_time: self.sim_time,
            status: &self.status,
            tickets: self.desk.tickets().collect(),
        }
    }

    /// Stream events queued since the last call, oldest first.
    pub fn take_events(&mut self) -> Vec<(StreamKind, Value)> {
        std::mem::take(&mut self.outbox)
    }

    fn emit<T: Serialize>(&mut self, kind: StreamKind, payload: &T) {
        self.outbox.push((kind, to_value(payload)));
    }

    /// Parses, stores and localizes one log line.
    ///
    /// The record is stored before localization, so a miss or an unbound
    /// sensor still leaves it in the log.
    pub fn ingest_detection(&mut self, line: &str) -> Result<Ingested, TwinError> {
        let record = parse_detection(line)?;
        let record_id = self.store.append(record.clone())?;
        self.emit(StreamKind::Detection, &json!({ "record_id": record_id, "record": record }));
        let event = match self.locate(&record) {
            Ok(e) => e,
            Err(reason) => return Err(TwinError::NotLocalized { record_id, reason }),
        };
        let event_id = event.id;
        let before = self.status.fire_events.len();
        self.raw_events.push(event.clone());
        self.status.fire_events = merge_events(&self.raw_events, self.config.merge_radius, self.config.merge_window);
        let merged = self.status.fire_events.len() == before;
        if !merged {
            self.ignite(event.position)?;
        }
        self.status.alert_level = derive_alert_level(&self.status.fire_events, self.config.high_alert_temp);
        self.emit(StreamKind::FireEvent, &json!({ "record_id": record_id, "event": event, "merged": merged }));
        self.refresh_recommendations();
        Ok(Ingested {
            record_id,
            event_id,
            merged,
        })
    }

    fn locate(&mut self, record: &DetectionRecord) -> Result<FireEvent, String> {
        let cam = self
            .sensors
            .camera_for(&record.sensor_id)
            .ok_or_else(|| format!("sensor {:?} has no camera binding", record.sensor_id))?;
        let id = self.next_event_id;
        let event = localize(&self.scene, cam, record, id).map_err(|e| e.to_string())?;
        self.next_event_id += 1;
        Ok(event)
    }

    fn ignite(&mut self, at: Vec3) -> Result<(), TwinError> {
        match &mut self.spread {
            Some(s) => {
                s.ignite(at, self.sim_time)?;
            }
            None => {
                let s = SpreadState::init(
                    &self.scene,
                    &self.materials,
                    &[(at, self.sim_time)],
                    self.status.env,
                    self.config.spread,
                )?;
                self.spread = Some(s);
            }
        }
        self.snapshot_spread();
        Ok(())
    }

    fn snapshot_spread(&mut self) {
        self.status.spread = self.spread.as_ref().map(SpreadSnapshot::of);
    }

    /// Applies an environment message. A repeat of the current values changes nothing.
    pub fn set_environment(&mut self, update: EnvironmentUpdate) -> Result<(), TwinError> {
        let env = Environment {
            air_temp: update.air_temp,
            humidity: update.humidity,
            wind_speed: update.wind_speed,
            wind_direction: update.wind_direction,
        };
        env.validate()?;
        if env == self.status.env {
            return Ok(());
        }
        if let Some(s) = &mut self.spread {
            s.set_environment(env)?;
        }
        self.status.env = env;
        self.refresh_recommendations();
        Ok(())
    }

    /// Advances simulated time by `seconds` and emits one spread tick.
    pub fn advance(&mut self, seconds: f64) -> Result<(), TwinError> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(TwinError::BadRequest("advance needs a finite, non-negative duration".into()));
        }
        self.sim_time += seconds;
        if let Some(s) = &mut self.spread {
            s.run_until(self.sim_time, self.config.dt)?;
        }
        self.snapshot_spread();
        let tick = match &self.status.spread {
            Some(s) => json!({ "sim_time": self.sim_time, "burning_area": s.burning_area, "flames": s.flames }),
            None => json!({ "sim_time": self.sim_time, "burning_area": 0.0, "flames": [] }),
        };
        self.emit(StreamKind::SpreadTick, &tick);
        Ok(())
    }

    /// Top-`k` matches and the ranked plans of the best one, each tuned to the
    /// resource register.
    pub fn recommendations(&self, k: usize) -> Result<Recommendations, TwinError> {
        if k == 0 {
            return Err(LibraryError::BadK.into());
        }
        if self.status.fire_events.is_empty() || self.library.is_empty() {
            return Ok(Recommendations {
                matches: Vec::new(),
                recommendations: Vec::new(),
                reason: Some("no_matches"),
            });
        }
        let matches = match_status(&self.library, &self.status, k, &self.config.matching)?;
        let mut recs = recommend(&matches, &self.library, self.desk.ledger(), &self.config.weights)?;
        for r in &mut recs {
            r.plan = r.plan.tuned_to(&self.status);
        }
        Ok(Recommendations {
            matches,
            recommendations: recs,
            reason: None,
        })
    }

    fn refresh_recommendations(&mut self) {
        if let Ok(r) = self.recommendations(self.config.k) {
            if r.reason.is_none() {
                self.emit(StreamKind::Recommendation, &r);
            }
            self.latest = Some(r);
        }
    }

    fn emit_ticket(&mut self, id: u64) {
        if let Some(t) = self.desk.ticket(id).cloned() {
            self.emit(StreamKind::TicketTransition, &t);
        }
    }

    /// Opens a ticket for `plan_id` and puts it up for approval.
    ///
    /// Without `scenario_id` the plan is taken from the current
    /// recommendations; with one, from that library scenario, tuned to the
    /// resource register.
    pub fn submit_plan(&mut self, plan_id: &str, scenario_id: Option<&str>) -> Result<CommandTicket, TwinError> {
        let (scenario, plan): (String, InterventionPlan) = match scenario_id {
            Some(sid) => {
                let s = self
                    .library
                    .iter()
                    .find(|s| s.id == sid)
                    .ok_or_else(|| CommandError::UnknownScenario(sid.into()))?;
                let p = s.plan(plan_id).ok_or_else(|| TwinError::UnknownPlan(plan_id.into()))?;
                (s.id.clone(), p.tuned_to(&self.status))
            }
            None => {
                if self.latest.is_none() {
                    self.latest = Some(self.recommendations(self.config.k)?);
                }
                let rec = self
                    .latest
                    .as_ref()
                    .and_then(|l| l.recommendations.iter().find(|r| r.plan.id == plan_id))
                    .ok_or_else(|| TwinError::UnknownPlan(plan_id.into()))?;
                (rec.scenario_id.clone(), rec.plan.clone())
            }
        };
        let now = wall_clock();
        let id = self.desk.propose(plan, &scenario, now)?.id;
        self.emit_ticket(id);
        self.desk.submit_ticket(id, now)?;
        self.emit_ticket(id);
        Ok(self.desk.ticket(id).cloned().expect("ticket just created"))
    }

    pub fn decide(
        &mut self,
        ticket_id: u64,
        approver_id: &str,
        verdict: Verdict,
        modified_plan: Option<InterventionPlan>,
    ) -> Result<CommandTicket, TwinError> {
        let decision = Decision {
            approver_id: approver_id.into(),
            verdict,
            modified_plan,
            timestamp: wall_clock(),
        };
        let t = self.desk.decide(ticket_id, decision)?.clone();
        self.emit_ticket(ticket_id);
        Ok(t)
    }

    /// Where drones take off: the site's base, else an available drone's
    /// position, else the center of the scene.
    fn drone_base(&self) -> Vec3 {
        self.drone_base
            .or_else(|| self.status.position_of(ResourceKind::Drone))
            .unwrap_or_else(|| {
                let b = self.scene.scene().bounds();
                (b.min + b.max) * 0.5
            })
    }

    pub fn dispatch(&mut self, ticket_id: u64) -> Result<CommandTicket, TwinError> {
        let flames = self.spread.as_ref().map(|s| s.flame_spheres()).unwrap_or_default();
        let base = self.drone_base();
        let ctx = DispatchContext {
            scene: self.scene.scene(),
            flames: &flames,
            drone_base: base,
            route: self.config.route,
        };
        let t = self.desk.dispatch(ticket_id, &ctx, wall_clock())?.clone();
        self.emit_ticket(ticket_id);
        Ok(t)
    }

    pub fn report_outcome(&mut self, ticket_id: u64, success: bool, note: &str) -> Result<CommandTicket, TwinError> {
        let entry = self.desk.report_outcome(ticket_id, success, note, wall_clock())?;
        self.status.outcomes.push(entry);
        self.emit_ticket(ticket_id);
        Ok(self.desk.ticket(ticket_id).cloned().expect("ticket exists"))
    }

    /// Re-localizes a stored record as a 30 s symbolic fire.
    pub fn replay(&mut self, record_id: RecordId) -> Result<ReplayEvent, TwinError> {
        let record = self.store.get(record_id).ok_or(StoreError::NotFound(record_id))?;
        let cam = self
            .sensors
            .camera_for(&record.sensor_id)
            .ok_or_else(|| TwinError::NotLocalized {
                record_id,
                reason: format!("sensor {:?} has no camera binding", record.sensor_id),
            })?;
        let ev = self
            .store
            .replay(record_id, &self.scene, cam, self.next_event_id)
            .map_err(|e| match e {
                StoreError::Localization(_) => TwinError::NotLocalized {
                    record_id,
                    reason: e.to_string(),
                },
                other => other.into(),
            })?;
        self.next_event_id += 1;
        self.emit(StreamKind::Replay, &ev);
        Ok(ev)
    }

    /// Runs a clone of the live simulation `horizon_s` ahead. Live state is untouched.
    pub fn projection(&self, horizon_s: f64) -> Result<Projection, TwinError> {
        if !horizon_s.is_finite() || horizon_s <= 0.0 {
            return Err(TwinError::BadRequest("horizon_s must be positive".into()));
        }
        let until = self.sim_time + horizon_s;
        let (arrivals, burning_area) = match &self.spread {
            Some(live) => {
                let mut s = live.clone();
                s.run_until(until, self.config.dt)?;
                (s.arrival_map(), s.burning_area())
            }
            None => (vec![None; self.scene.patches().len()], 0.0),
        };
        let arrival_map = self
            .scene
            .patches()
            .iter()
            .zip(arrivals)
            .map(|(p, t)| ArrivalEntry {
                patch_id: p.id,
                surface_id: p.surface_id,
                centroid: p.centroid,
                arrival_time: t,
            })
            .collect();
        Ok(Projection {
            from: self.sim_time,
            until,
            burning_area,
            arrival_map,
        })
    }

    /// Hash of everything a read must not change.
    pub fn live_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.sim_time.to_bits().hash(&mut h);
        self.spread.as_ref().map(|s| s.state_hash()).hash(&mut h);
        serde_json::to_string(&self.status_view()).unwrap_or_default().hash(&mut h);
        self.store.len().hash(&mut h);
        h.finish()
    }
}

/// Builds a twin from an in-memory scene, mostly for tests and tools.
pub fn twin_for(
    scene: Scene,
    patch_size: f64,
    sensors: SensorBindings,
    materials: Vec<MaterialProfile>,
    library: Vec<ScenarioRecord>,
    site: SiteDoc,
) -> anyhow::Result<Twin> {
    let scene = PatchedScene::new(scene, patch_size)?;
    Ok(Twin::new(
        scene,
        sensors,
        materials,
        library,
        IncidentStore::in_memory(),
        site,
        TwinConfig::default(),
    )?)
}
