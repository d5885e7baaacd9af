//! On-disk documents: scenes, sensor bindings, material tables, site
//! configuration, scenario libraries and precompute grids. All JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ivsr_core::camera::{CameraPose, DEFAULT_PIXEL_COLS, DEFAULT_PIXEL_ROWS};
use ivsr_core::geometry::{Scene, Surface, SurfaceKind};
use ivsr_core::library::{
    BaseFeatures, GridMaterial, MaterialClass, ObjectFlags, ParamGrid, PlanTemplate, ScenarioRecord,
};
use ivsr_core::spread::{MaterialProfile, DEFAULT_DT_S};
use ivsr_core::status::ResourceEntry;
use ivsr_core::{Aabb, Vec3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceDoc {
    pub id: u32,
    pub kind: SurfaceKind,
    pub material_tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collidable: Option<bool>,
    #[serde(default)]
    pub occluder: bool,
    /// Flat `x, y, z` coordinates.
    pub vertices: Vec<f64>,
    pub indices: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDoc {
    pub surfaces: Vec<SurfaceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Aabb>,
}

impl SceneDoc {
    pub fn into_scene(self) -> anyhow::Result<Scene> {
        let surfaces = self
            .surfaces
            .into_iter()
            .map(|s| {
                let surface = Surface::from_indexed(s.id, s.kind, &s.vertices, &s.indices, s.material_tag)
                    .with_context(|| format!("surface {}", s.id))?;
                let collidable = s.collidable.unwrap_or(surface.collidable);
                Ok(surface.with_collidable(collidable).with_occluder(s.occluder))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(Scene::new(surfaces, self.bounds)?)
    }

    /// One unshared vertex triple per triangle.
    pub fn from_scene(scene: &Scene) -> Self {
        let surfaces = scene
            .surfaces()
            .iter()
            .map(|s| SurfaceDoc {
                id: s.id.0,
                kind: s.kind,
                material_tag: s.material_tag.clone(),
                collidable: Some(s.collidable),
                occluder: s.occluder,
                vertices: s
                    .triangles
                    .iter()
                    .flat_map(|t| t.vertices())
                    .flat_map(|v| v.to_array())
                    .collect(),
                indices: (0..s.triangles.len() as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect(),
            })
            .collect();
        Self {
            surfaces,
            bounds: Some(scene.bounds()),
        }
    }
}

pub fn load_scene(path: &Path) -> anyhow::Result<Scene> {
    read_json::<SceneDoc>(path)?
        .into_scene()
        .with_context(|| format!("building scene from {}", path.display()))
}

fn default_cols() -> u32 {
    DEFAULT_PIXEL_COLS
}

fn default_rows() -> u32 {
    DEFAULT_PIXEL_ROWS
}

/// A camera pose as stored on disk; the pixel grid defaults to 160 x 120.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraDoc {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    #[serde(default)]
    pub roll: f64,
    pub h_fov: f64,
    pub v_fov: f64,
    #[serde(default = "default_cols")]
    pub pixel_cols: u32,
    #[serde(default = "default_rows")]
    pub pixel_rows: u32,
}

impl From<CameraDoc> for CameraPose {
    fn from(d: CameraDoc) -> Self {
        CameraPose::new(d.position, d.yaw, d.pitch, d.roll, d.h_fov, d.v_fov).with_pixels(d.pixel_cols, d.pixel_rows)
    }
}

impl From<&CameraPose> for CameraDoc {
    fn from(c: &CameraPose) -> Self {
        Self {
            position: c.position,
            yaw: c.yaw,
            pitch: c.pitch,
            roll: c.roll,
            h_fov: c.h_fov,
            v_fov: c.v_fov,
            pixel_cols: c.pixel_cols,
            pixel_rows: c.pixel_rows,
        }
    }
}

pub fn load_cameras(path: &Path) -> anyhow::Result<Vec<CameraPose>> {
    let docs: Vec<CameraDoc> = read_json(path)?;
    let cams: Vec<CameraPose> = docs.into_iter().map(Into::into).collect();
    for (i, c) in cams.iter().enumerate() {
        c.validate().with_context(|| format!("camera {i} in {}", path.display()))?;
    }
    Ok(cams)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorDoc {
    pub sensor_id: String,
    #[serde(flatten)]
    pub camera: CameraDoc,
}

/// Sensor to camera bindings. Records with an empty `SensorId` bind to
/// `default`, or to the first sensor when no default is named.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    pub sensors: Vec<SensorDoc>,
}

#[derive(Debug, Clone, Default)]
pub struct SensorBindings {
    cameras: BTreeMap<String, CameraPose>,
    default: Option<String>,
}

impl SensorBindings {
    pub fn new(doc: SensorsDoc) -> anyhow::Result<Self> {
        let mut cameras = BTreeMap::new();
        for s in &doc.sensors {
            let cam: CameraPose = s.camera.clone().into();
            cam.validate().with_context(|| format!("sensor {:?}", s.sensor_id))?;
            if cameras.insert(s.sensor_id.clone(), cam).is_some() {
                bail!("duplicate sensor id {:?}", s.sensor_id);
            }
        }
        let default = match doc.default {
            Some(d) if !cameras.contains_key(&d) => bail!("default sensor {d:?} is not defined"),
            Some(d) => Some(d),
            None => doc.sensors.first().map(|s| s.sensor_id.clone()),
        };
        Ok(Self { cameras, default })
    }

    /// Binds every record, whatever its sensor id, to one camera.
    pub fn single(camera: CameraPose) -> Self {
        Self {
            cameras: BTreeMap::from([(String::new(), camera)]),
            default: Some(String::new()),
        }
    }

    pub fn camera_for(&self, sensor_id: &str) -> Option<&CameraPose> {
        if sensor_id.is_empty() {
            return self.default.as_ref().and_then(|d| self.cameras.get(d));
        }
        self.cameras.get(sensor_id)
    }
}

pub fn load_sensors(path: &Path) -> anyhow::Result<SensorBindings> {
    SensorBindings::new(read_json(path)?).with_context(|| format!("sensor file {}", path.display()))
}

/// A material row. A null `ignition_delay_s` marks a non-flammable material.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialDoc {
    pub tag: String,
    pub ignition_delay_s: Option<f64>,
    pub expansion_speed_mps: f64,
}

impl MaterialDoc {
    pub fn into_profile(self) -> anyhow::Result<MaterialProfile> {
        let delay = self.ignition_delay_s.unwrap_or(f64::INFINITY);
        Ok(MaterialProfile::new(self.tag, delay, self.expansion_speed_mps)?)
    }
}

impl From<&MaterialProfile> for MaterialDoc {
    fn from(m: &MaterialProfile) -> Self {
        Self {
            tag: m.tag.clone(),
            ignition_delay_s: m.ignition_delay.is_finite().then_some(m.ignition_delay),
            expansion_speed_mps: m.expansion_speed,
        }
    }
}

pub fn profiles(docs: Vec<MaterialDoc>) -> anyhow::Result<Vec<MaterialProfile>> {
    docs.into_iter().map(MaterialDoc::into_profile).collect()
}

pub fn load_materials(path: &Path) -> anyhow::Result<Vec<MaterialProfile>> {
    profiles(read_json(path)?).with_context(|| format!("material file {}", path.display()))
}

/// Site facts the sensors do not report: the resource register, site class,
/// objects in the fire's path and where drones take off.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SiteDoc {
    #[serde(default)]
    pub resources: Vec<ResourceEntry>,
    #[serde(default)]
    pub material_class: Option<MaterialClass>,
    #[serde(default)]
    pub objects_in_path: ObjectFlags,
    #[serde(default)]
    pub drone_base: Option<Vec3>,
}

/// Every `*.json` in `dir`, in file-name order.
pub fn load_library(dir: &Path) -> anyhow::Result<Vec<ScenarioRecord>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading library {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    let mut out: Vec<ScenarioRecord> = Vec::with_capacity(paths.len());
    for p in paths {
        let s: ScenarioRecord = read_json(&p)?;
        s.validate().with_context(|| p.display().to_string())?;
        if out.iter().any(|o| o.id == s.id) {
            bail!("duplicate scenario id {:?} in {}", s.id, p.display());
        }
        out.push(s);
    }
    Ok(out)
}

/// Writes one `<id>.json` per scenario.
pub fn save_library(dir: &Path, library: &[ScenarioRecord]) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    for s in library {
        write_json(&dir.join(format!("{}.json", s.id)), s)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMaterialDoc {
    pub class: MaterialClass,
    pub profiles: Vec<MaterialDoc>,
}

fn default_dt() -> f64 {
    DEFAULT_DT_S
}

fn default_air_temp() -> f64 {
    20.0
}

fn default_medium() -> f64 {
    0.1
}

fn default_high() -> f64 {
    0.4
}

/// Input of `library build`: the parameter grid plus the plan templates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridDoc {
    /// `[speed km/h, direction degrees]` pairs.
    pub winds: Vec<(f64, f64)>,
    pub humidities: Vec<f64>,
    pub materials: Vec<GridMaterialDoc>,
    pub ignition_sites: Vec<Vec3>,
    pub horizon_s: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default = "default_air_temp")]
    pub air_temp: f64,
    #[serde(default)]
    pub base: BaseFeatures,
    #[serde(default = "default_medium")]
    pub medium_fraction: f64,
    #[serde(default = "default_high")]
    pub high_fraction: f64,
    pub templates: Vec<PlanTemplate>,
}

impl GridDoc {
    pub fn into_parts(self) -> anyhow::Result<(ParamGrid, Vec<PlanTemplate>)> {
        let materials = self
            .materials
            .into_iter()
            .map(|m| {
                Ok(GridMaterial {
                    class: m.class,
                    profiles: profiles(m.profiles)?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let grid = ParamGrid {
            winds: self.winds,
            humidities: self.humidities,
            materials,
            ignition_sites: self.ignition_sites,
            horizon_s: self.horizon_s,
            dt_s: self.dt_s,
            air_temp: self.air_temp,
            base: self.base,
            medium_fraction: self.medium_fraction,
            high_fraction: self.high_fraction,
        };
        Ok((grid, self.templates))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_documents_round_trip() {
        let scene = Scene::room(4.0, 3.0, 2.5, "wood").unwrap();
        let doc = SceneDoc::from_scene(&scene);
        let text = serde_json::to_string(&doc).unwrap();
        let back = serde_json::from_str::<SceneDoc>(&text).unwrap().into_scene().unwrap();
        assert_eq!(back.surfaces(), scene.surfaces());
        assert_eq!(back.bounds(), scene.bounds());
    }

    #[test]
    fn null_delay_is_non_flammable() {
        let rows: Vec<MaterialDoc> = serde_json::from_str(
            r#"[{"tag": "concrete", "ignition_delay_s": null, "expansion_speed_mps": 0.05},
                {"tag": "wood", "ignition_delay_s": 8, "expansion_speed_mps": 0.1}]"#,
        )
        .unwrap();
        let p = profiles(rows).unwrap();
        assert!(!p[0].is_flammable());
        assert_eq!(p[1].ignition_delay, 8.0);
        let back = MaterialDoc::from(&p[0]);
        assert_eq!(back.ignition_delay_s, None);
    }

    #[test]
    fn empty_sensor_id_binds_to_default() {
        let doc: SensorsDoc = serde_json::from_str(
            r#"{"sensors": [
                {"sensor_id": "a", "position": {"x": 0, "y": 0, "z": 2}, "yaw": 0, "pitch": -30, "h_fov": 90, "v_fov": 70},
                {"sensor_id": "b", "position": {"x": 1, "y": 0, "z": 2}, "yaw": 90, "pitch": -30, "h_fov": 90, "v_fov": 70}
            ]}"#,
        )
        .unwrap();
        let b = SensorBindings::new(doc.clone()).unwrap();
        assert_eq!(b.camera_for("").unwrap().yaw, 0.0);
        assert_eq!(b.camera_for("b").unwrap().yaw, 90.0);
        assert!(b.camera_for("c").is_none());
        assert_eq!(b.camera_for("").unwrap().pixel_cols, 160);
        let named = SensorsDoc {
            default: Some("b".into()),
            ..doc.clone()
        };
        assert_eq!(SensorBindings::new(named).unwrap().camera_for("").unwrap().yaw, 90.0);
        let missing = SensorsDoc {
            default: Some("z".into()),
            ..doc
        };
        assert!(SensorBindings::new(missing).is_err());
    }
}
