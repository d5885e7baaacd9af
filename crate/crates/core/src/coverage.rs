//! Virtual-camera coverage: S0 (collidable area), S1 (area of patches hit by at
//! least one ray of the camera's ray grid) and P1 = S1 / S0, plus greedy
//! multi-camera placement on top of the per-camera covered patch sets.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::geometry::{Hit, PatchId, PatchedScene};

pub const DEFAULT_RAYS_N: u32 = 10;
pub const DEFAULT_PATCH_SIZE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CoverageReport {
    pub s0: f64,
    pub s1: f64,
    pub p1: f64,
    pub hit_points: Vec<Hit>,
    pub covered_patch_ids: BTreeSet<PatchId>,
    /// Area of patches hit by two or more cameras; zero for single-camera reports.
    pub overlap_area: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlacementResult {
    pub chosen: Vec<CameraPose>,
    /// Index of each chosen camera in the candidate list.
    pub chosen_indices: Vec<usize>,
    pub marginal_gains: Vec<f64>,
    pub union_s1: f64,
    pub overlap_area: f64,
}

fn area_of<'a, I: IntoIterator<Item = &'a PatchId>>(scene: &PatchedScene, ids: I) -> f64 {
    ids.into_iter()
        .map(|id| scene.patch(*id).map_or(0.0, |p| p.area))
        .sum()
}

/// Hits of the camera's `n x n` ray grid, in grid order. Misses are skipped.
pub fn grid_hits(scene: &PatchedScene, camera: &CameraPose, n: u32) -> Vec<Hit> {
    camera
        .ray_grid(n)
        .iter()
        .filter_map(|r| scene.ray_cast(r))
        .collect()
}

/// Covered patch set of a single camera.
pub fn covered_patches(scene: &PatchedScene, camera: &CameraPose, n: u32) -> BTreeSet<PatchId> {
    grid_hits(scene, camera, n).iter().filter_map(|h| h.patch_id).collect()
}

pub fn compute_coverage(scene: &PatchedScene, camera: &CameraPose, n: u32) -> CoverageReport {
    let hit_points = grid_hits(scene, camera, n);
    let covered: BTreeSet<PatchId> = hit_points.iter().filter_map(|h| h.patch_id).collect();
    let s0 = scene.total_area();
    let s1 = area_of(scene, &covered);
    CoverageReport {
        s0,
        s1,
        p1: s1 / s0,
        hit_points,
        covered_patch_ids: covered,
        overlap_area: 0.0,
    }
}

/// Union coverage of several cameras. Hit points are concatenated in camera order.
pub fn union_coverage(scene: &PatchedScene, cameras: &[CameraPose], n: u32) -> CoverageReport {
    let mut hit_points = Vec::new();
    let mut counts = vec![0u32; scene.patches().len()];
    for cam in cameras {
        let hits = grid_hits(scene, cam, n);
        let own: BTreeSet<PatchId> = hits.iter().filter_map(|h| h.patch_id).collect();
        for id in own {
            counts[id.index()] += 1;
        }
        hit_points.extend(hits);
    }
    let covered: BTreeSet<PatchId> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= 1)
        .map(|(i, _)| PatchId(i as u32))
        .collect();
    let overlap_area = area_of(
        scene,
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= 2)
            .map(|(i, _)| PatchId(i as u32))
            .collect::<Vec<_>>()
            .iter(),
    );
    let s0 = scene.total_area();
    let s1 = area_of(scene, &covered);
    CoverageReport {
        s0,
        s1,
        p1: s1 / s0,
        hit_points,
        covered_patch_ids: covered,
        overlap_area,
    }
}

/// Greedy max-coverage selection of up to `k` cameras from `candidates`.
///
/// Each round takes the candidate with the largest marginal covered area, the
/// earliest candidate winning ties. Stops early once the best gain drops below
/// `min_gain`.
pub fn greedy_placement(
    scene: &PatchedScene,
    candidates: &[CameraPose],
    k: usize,
    min_gain: f64,
    n: u32,
) -> PlacementResult {
    let sets: Vec<BTreeSet<PatchId>> = if k == 0 {
        Vec::new()
    } else {
        candidates.iter().map(|c| covered_patches(scene, c, n)).collect()
    };
    greedy_over_sets(scene, candidates, &sets, k, min_gain)
}

/// Greedy selection over precomputed covered sets (one per candidate).
pub fn greedy_over_sets(
    scene: &PatchedScene,
    candidates: &[CameraPose],
    sets: &[BTreeSet<PatchId>],
    k: usize,
    min_gain: f64,
) -> PlacementResult {
    let mut counts = vec![0u32; scene.patches().len()];
    let mut taken = vec![false; sets.len()];
    let mut result = PlacementResult {
        chosen: Vec::new(),
        chosen_indices: Vec::new(),
        marginal_gains: Vec::new(),
        union_s1: 0.0,
        overlap_area: 0.0,
    };
    for _ in 0..k.min(sets.len()) {
        let mut best: Option<(usize, f64)> = None;
        for (i, set) in sets.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let gain = area_of(scene, set.iter().filter(|id| counts[id.index()] == 0));
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, gain)) = best else { break };
        if gain < min_gain {
            break;
        }
        taken[i] = true;
        for id in &sets[i] {
            counts[id.index()] += 1;
        }
        result.chosen.push(candidates[i]);
        result.chosen_indices.push(i);
        result.marginal_gains.push(gain);
        result.union_s1 += gain;
    }
    result.overlap_area = scene
        .patches()
        .iter()
        .filter(|p| counts[p.id.index()] >= 2)
        .map(|p| p.area)
        .sum();
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Scene, Surface, SurfaceKind, Vec3};

    fn floor_scene(size: f64, patch: f64) -> PatchedScene {
        let f = Surface::axis_rect(0, SurfaceKind::Floor, 2, 0.0, (0.0, 0.0), (size, size), true, "c");
        PatchedScene::new(Scene::new(vec![f], None).unwrap(), patch).unwrap()
    }

    #[test]
    fn camera_aimed_away_covers_nothing() {
        let scene = floor_scene(10.0, 1.0);
        let cam = CameraPose::new(Vec3::new(5.0, 5.0, 2.0), 0.0, 60.0, 0.0, 60.0, 40.0);
        let r = compute_coverage(&scene, &cam, 10);
        assert_eq!(r.s1, 0.0);
        assert_eq!(r.p1, 0.0);
        assert!(r.hit_points.is_empty());
    }

    #[test]
    fn report_invariants_hold() {
        let scene = PatchedScene::new(Scene::room(10.0, 10.0, 3.0, "c").unwrap(), 0.5).unwrap();
        let cam = CameraPose::new(Vec3::new(0.5, 0.5, 2.5), 45.0, -20.0, 0.0, 90.0, 60.0);
        let r = compute_coverage(&scene, &cam, 10);
        assert_eq!(r.hit_points.len(), 100);
        assert!(r.s1 > 0.0 && r.s1 <= r.s0);
        assert!((r.p1 - r.s1 / r.s0).abs() < 1e-12);
        let sum: f64 = r.covered_patch_ids.iter().map(|id| scene.patch(*id).unwrap().area).sum();
        assert_eq!(sum, r.s1);
    }

    #[test]
    fn identical_cameras_fully_overlap() {
        let scene = floor_scene(10.0, 0.5);
        let cam = CameraPose::looking_down(Vec3::new(5.0, 5.0, 3.0), 60.0, 60.0);
        let single = compute_coverage(&scene, &cam, 10);
        let one = union_coverage(&scene, &[cam], 10);
        assert_eq!(one.overlap_area, 0.0);
        let two = union_coverage(&scene, &[cam, cam], 10);
        assert_eq!(two.s1, single.s1);
        assert_eq!(two.overlap_area, single.s1);
    }

    #[test]
    fn disjoint_cameras_add_up() {
        let scene = floor_scene(20.0, 0.5);
        let a = CameraPose::looking_down(Vec3::new(5.0, 5.0, 2.0), 60.0, 60.0);
        let b = CameraPose::looking_down(Vec3::new(15.0, 15.0, 2.0), 60.0, 60.0);
        let ra = compute_coverage(&scene, &a, 10);
        let rb = compute_coverage(&scene, &b, 10);
        assert!(ra.covered_patch_ids.is_disjoint(&rb.covered_patch_ids));
        let u = union_coverage(&scene, &[a, b], 10);
        assert!((u.s1 - (ra.s1 + rb.s1)).abs() < 1e-12);
        assert_eq!(u.overlap_area, 0.0);
    }

    #[test]
    fn greedy_edge_cases() {
        let scene = floor_scene(10.0, 0.5);
        let cam = CameraPose::looking_down(Vec3::new(5.0, 5.0, 3.0), 60.0, 60.0);
        let r = greedy_placement(&scene, &[cam], 0, 0.0, 10);
        assert!(r.chosen.is_empty());
        assert_eq!(r.union_s1, 0.0);
        let r = greedy_placement(&scene, &[cam], 1, 0.0, 10);
        assert_eq!(r.chosen, vec![cam]);
        assert_eq!(r.union_s1, compute_coverage(&scene, &cam, 10).s1);
    }

    #[test]
    fn min_gain_stops_selection() {
        let scene = floor_scene(10.0, 0.5);
        let cam = CameraPose::looking_down(Vec3::new(5.0, 5.0, 3.0), 60.0, 60.0);
        // the duplicate adds nothing, so a positive threshold stops after one
        let r = greedy_placement(&scene, &[cam, cam], 2, 1e-9, 10);
        assert_eq!(r.chosen.len(), 1);
        let r = greedy_placement(&scene, &[cam, cam], 2, 0.0, 10);
        assert_eq!(r.chosen.len(), 2);
        assert_eq!(r.marginal_gains[1], 0.0);
    }
}
