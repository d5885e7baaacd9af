//! Maps a sensor's hottest-pixel detection through the bound virtual camera onto
//! the scene, producing a 3D fire event.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::camera::{CameraError, CameraPose};
use crate::geometry::{PatchedScene, Ray, SurfaceId, Vec3};
use crate::incident::{DetectionRecord, Timestamp};

pub const DEFAULT_MERGE_RADIUS_M: f64 = 0.5;
pub const DEFAULT_MERGE_WINDOW_S: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LocalizationError {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("ray through pixel ({column}, {row}) left the scene without a collidable hit")]
    LocalizationMiss { column: u32, row: u32 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FireEvent {
    pub id: u64,
    pub position: Vec3,
    pub surface_id: SurfaceId,
    pub threat_level: String,
    /// Degrees Celsius.
    pub peak_temp: f64,
    pub pixel_count: u64,
    pub timestamp: Timestamp,
    pub sensor_id: String,
}

/// Ray through the center of pixel `(column, row)`.
pub fn pixel_to_ray(camera: &CameraPose, column: u32, row: u32) -> Result<Ray, CameraError> {
    camera.validate()?;
    camera.pixel_to_ray(column, row)
}

/// Casts the detection's pixel into the scene.
///
/// Occluder hits count as misses: a fire event must sit on a collidable surface.
pub fn localize(
    scene: &PatchedScene,
    camera: &CameraPose,
    record: &DetectionRecord,
    event_id: u64,
) -> Result<FireEvent, LocalizationError> {
    let ray = pixel_to_ray(camera, record.column, record.row)?;
    let miss = LocalizationError::LocalizationMiss {
        column: record.column,
        row: record.row,
    };
    let hit = scene.ray_cast(&ray).ok_or(miss.clone())?;
    if hit.patch_id.is_none() {
        return Err(miss);
    }
    Ok(FireEvent {
        id: event_id,
        position: hit.point,
        surface_id: hit.surface_id,
        threat_level: record.fire_threat_level.clone(),
        peak_temp: f64::from(record.temperature),
        pixel_count: record.number,
        timestamp: record.start_datetime,
        sensor_id: record.sensor_id.clone(),
    })
}

/// Single-linkage merge of events closer than `radius` meters and `window` seconds.
///
/// A merged event sits at the centroid of its members, keeps the earliest
/// timestamp, the smallest id, the hottest member's threat level, surface and
/// sensor, the maximum temperature and the summed pixel count. `radius == 0`
/// disables merging. Output keeps first-occurrence order.
pub fn merge_events(events: &[FireEvent], radius: f64, window: f64) -> Vec<FireEvent> {
    if radius <= 0.0 || events.len() < 2 {
        return events.to_vec();
    }
    let n = events.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let close = events[i].position.distance(events[j].position) <= radius
                && events[i].timestamp.abs_diff_seconds(events[j].timestamp) <= window;
            if close {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match out.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(i),
            None => out.push((root, alloc::vec![i])),
        }
    }
    out.into_iter()
        .map(|(_, members)| {
            if members.len() == 1 {
                return events[members[0]].clone();
            }
            let hottest = members
                .iter()
                .copied()
                .max_by(|&a, &b| events[a].peak_temp.total_cmp(&events[b].peak_temp).then(b.cmp(&a)))
                .unwrap_or(members[0]);
            let mut merged = events[hottest].clone();
            let count = members.len() as f64;
            merged.position = members.iter().fold(Vec3::ZERO, |acc, &m| acc + events[m].position) / count;
            merged.pixel_count = members.iter().map(|&m| events[m].pixel_count).sum();
            merged.id = members.iter().map(|&m| events[m].id).min().unwrap_or(merged.id);
            merged.timestamp = members.iter().map(|&m| events[m].timestamp).min().unwrap_or(merged.timestamp);
            merged
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Scene;
    use alloc::string::ToString;
    use alloc::vec;

    fn event(id: u64, pos: Vec3, secs: i64, temp: f64, pixels: u64) -> FireEvent {
        FireEvent {
            id,
            position: pos,
            surface_id: SurfaceId(0),
            threat_level: "probable fire".to_string(),
            peak_temp: temp,
            pixel_count: pixels,
            timestamp: Timestamp::from_micros(secs * 1_000_000),
            sensor_id: "s1".to_string(),
        }
    }

    fn record(column: u32, row: u32) -> DetectionRecord {
        DetectionRecord {
            fire_threat_level: "probable fire".to_string(),
            start_datetime: Timestamp::from_micros(0),
            cpu_temperature: 50.1,
            sensor_id: String::new(),
            column,
            row,
            temperature: 107,
            number: 400,
            extra: Vec::new(),
        }
    }

    #[test]
    fn two_close_events_merge() {
        let a = event(1, Vec3::new(1.0, 1.0, 0.0), 0, 80.0, 10);
        let b = event(2, Vec3::new(1.3, 1.0, 0.0), 2, 95.0, 20);
        let m = merge_events(&[a, b], 0.5, 10.0);
        assert_eq!(m.len(), 1);
        assert!((m[0].position.x - 1.15).abs() < 1e-12);
        assert_eq!(m[0].peak_temp, 95.0);
        assert_eq!(m[0].pixel_count, 30);
        assert_eq!(m[0].id, 1);
    }

    #[test]
    fn zero_radius_is_identity() {
        let a = event(1, Vec3::new(1.0, 1.0, 0.0), 0, 80.0, 10);
        let b = event(2, Vec3::new(1.0, 1.0, 0.0), 0, 95.0, 20);
        let input = vec![a, b];
        assert_eq!(merge_events(&input, 0.0, 10.0), input);
    }

    #[test]
    fn chain_merges_transitively() {
        // a-b 0.4 m, b-c 0.4 m, a-c 0.8 m: only single linkage joins all three
        let a = event(1, Vec3::new(0.0, 0.0, 0.0), 0, 70.0, 5);
        let b = event(2, Vec3::new(0.4, 0.0, 0.0), 1, 90.0, 6);
        let c = event(3, Vec3::new(0.8, 0.0, 0.0), 2, 60.0, 7);
        let m = merge_events(&[a, b, c], 0.5, 10.0);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].pixel_count, 18);
        assert!((m[0].position.x - 0.4).abs() < 1e-12);
    }

    #[test]
    fn time_window_separates() {
        let a = event(1, Vec3::ZERO, 0, 70.0, 5);
        let b = event(2, Vec3::ZERO, 60, 90.0, 6);
        assert_eq!(merge_events(&[a, b], 0.5, 10.0).len(), 2);
    }

    #[test]
    fn center_pixel_lands_below_camera() {
        let scene = PatchedScene::new(Scene::room(10.0, 10.0, 3.0, "c").unwrap(), 0.5).unwrap();
        let cam = CameraPose::looking_down(Vec3::new(4.0, 6.0, 2.9), 90.0, 90.0).with_pixels(161, 121);
        let e = localize(&scene, &cam, &record(80, 60), 7).unwrap();
        assert!((e.position - Vec3::new(4.0, 6.0, 0.0)).length() < 1e-9);
        assert_eq!(e.peak_temp, 107.0);
        assert_eq!(e.pixel_count, 400);
        assert_eq!(e.id, 7);
    }

    #[test]
    fn open_sky_is_a_miss() {
        let scene = PatchedScene::new(Scene::room(10.0, 10.0, 3.0, "c").unwrap(), 0.5).unwrap();
        // above the room looking up
        let cam = CameraPose::new(Vec3::new(5.0, 5.0, 5.0), 0.0, 90.0 - 1e-6, 0.0, 60.0, 45.0);
        assert!(matches!(
            localize(&scene, &cam, &record(107, 67), 0),
            Err(LocalizationError::LocalizationMiss { column: 107, row: 67 })
        ));
    }
}
