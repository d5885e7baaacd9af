//! Drone routing: A* over a voxel grid of the scene.
//!
//! A voxel is blocked when a collidable triangle overlaps its closed box or its
//! center lies within `flame radius + clearance` of a flame source. Moves go to
//! any of the 26 neighbours at cost `voxel * {1, sqrt 2, sqrt 3}`; a diagonal
//! move is allowed only when every voxel it sweeps past (each partial step
//! along a subset of its axes) is free, so paths never squeeze between blocked
//! corners.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Scene, Triangle, Vec3};
use crate::math::{abs, ceil, floor, sqrt};

pub const DEFAULT_VOXEL_M: f64 = 0.5;
pub const DEFAULT_CLEARANCE_M: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RouteError {
    #[error("no route: {0}")]
    RouteBlocked(&'static str),
    #[error("point {0:?} lies outside the scene bounds")]
    OutOfBounds(Vec3),
    #[error("voxel size and clearance must be positive and finite")]
    BadParameters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RouteConfig {
    pub voxel: f64,
    pub clearance: f64,
}

impl Default for RouteConfig {
    fn default() -> Self {
        Self {
            voxel: DEFAULT_VOXEL_M,
            clearance: DEFAULT_CLEARANCE_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RoutePlan {
    /// Voxel centers from start to goal; consecutive entries are grid neighbours.
    pub waypoints: Vec<Vec3>,
    pub total_length: f64,
    pub clearance: f64,
}

pub type VoxelIndex = [usize; 3];

/// Occupancy grid over an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Vec3,
    voxel: f64,
    dims: [usize; 3],
    blocked: Vec<bool>,
}

impl VoxelGrid {
    /// Grid over `bounds`, every voxel free.
    pub fn empty(bounds: Aabb, voxel: f64) -> Result<Self, RouteError> {
        if !(voxel > 0.0) || !voxel.is_finite() {
            return Err(RouteError::BadParameters);
        }
        let size = bounds.size();
        let count = |s: f64| (ceil(s / voxel - 1e-9) as usize).max(1);
        let dims = [count(size.x), count(size.y), count(size.z)];
        Ok(Self {
            origin: bounds.min,
            voxel,
            dims,
            blocked: vec![false; dims[0] * dims[1] * dims[2]],
        })
    }

    /// Grid with an explicit occupancy mask in x-fastest order.
    pub fn from_mask(origin: Vec3, voxel: f64, dims: [usize; 3], blocked: Vec<bool>) -> Result<Self, RouteError> {
        if !(voxel > 0.0) || !voxel.is_finite() || blocked.len() != dims[0] * dims[1] * dims[2] {
            return Err(RouteError::BadParameters);
        }
        Ok(Self {
            origin,
            voxel,
            dims,
            blocked,
        })
    }

    /// Blocks voxels overlapped by the scene's collidable geometry and by the
    /// given flame spheres inflated by `clearance`.
    pub fn build(scene: &Scene, flames: &[(Vec3, f64)], config: RouteConfig) -> Result<Self, RouteError> {
        if !(config.clearance >= 0.0) || !config.clearance.is_finite() {
            return Err(RouteError::BadParameters);
        }
        let mut grid = Self::empty(scene.bounds(), config.voxel)?;
        for s in scene.collidable() {
            for t in &s.triangles {
                grid.block_triangle(t);
            }
        }
        for &(center, radius) in flames {
            grid.block_sphere(center, radius + config.clearance);
        }
        Ok(grid)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel(&self) -> f64 {
        self.voxel
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    fn flat(&self, i: VoxelIndex) -> usize {
        i[0] + self.dims[0] * (i[1] + self.dims[1] * i[2])
    }

    pub fn is_blocked(&self, i: VoxelIndex) -> bool {
        self.blocked[self.flat(i)]
    }

    pub fn set_blocked(&mut self, i: VoxelIndex, blocked: bool) {
        let f = self.flat(i);
        self.blocked[f] = blocked;
    }

    pub fn center(&self, i: VoxelIndex) -> Vec3 {
        self.origin
            + Vec3::new(
                (i[0] as f64 + 0.5) * self.voxel,
                (i[1] as f64 + 0.5) * self.voxel,
                (i[2] as f64 + 0.5) * self.voxel,
            )
    }

    fn voxel_box(&self, i: VoxelIndex) -> Aabb {
        let lo = self.origin + Vec3::new(i[0] as f64, i[1] as f64, i[2] as f64) * self.voxel;
        Aabb::new(lo, lo + Vec3::new(self.voxel, self.voxel, self.voxel))
    }

    /// Voxel containing `p`; points on the far boundary map to the last voxel.
    pub fn index_of(&self, p: Vec3) -> Option<VoxelIndex> {
        let mut out = [0usize; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let rel = (p.axis(k) - self.origin.axis(k)) / self.voxel;
            if !rel.is_finite() || rel < -1e-9 || rel > self.dims[k] as f64 + 1e-9 {
                return None;
            }
            *slot = (floor(rel).max(0.0) as usize).min(self.dims[k] - 1);
        }
        Some(out)
    }

    /// Index range `[lo, hi]` per axis of voxels touching the box `lo..hi`.
    fn range(&self, lo: Vec3, hi: Vec3) -> Option<[(usize, usize); 3]> {
        let mut out = [(0, 0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let a = floor((lo.axis(k) - self.origin.axis(k)) / self.voxel);
            let b = floor((hi.axis(k) - self.origin.axis(k)) / self.voxel);
            let n = self.dims[k] as f64;
            if b < -1.0 || a > n {
                return None;
            }
            // a face exactly on a voxel boundary touches the voxel below it too
            let a = (a - 1.0).max(0.0).min(n - 1.0);
            let b = b.max(0.0).min(n - 1.0);
            *slot = (a as usize, b as usize);
        }
        Some(out)
    }

    fn block_triangle(&mut self, t: &Triangle) {
        let Some(bb) = Aabb::enclosing(t.vertices()) else {
            return;
        };
        let Some(r) = self.range(bb.min, bb.max) else {
            return;
        };
        for z in r[2].0..=r[2].1 {
            for y in r[1].0..=r[1].1 {
                for x in r[0].0..=r[0].1 {
                    let i = [x, y, z];
                    if !self.is_blocked(i) && triangle_overlaps_box(t, &self.voxel_box(i)) {
                        self.set_blocked(i, true);
                    }
                }
            }
        }
    }

    fn block_sphere(&mut self, center: Vec3, radius: f64) {
        let d = Vec3::new(radius, radius, radius);
        let Some(r) = self.range(center - d, center + d) else {
            return;
        };
        for z in r[2].0..=r[2].1 {
            for y in r[1].0..=r[1].1 {
                for x in r[0].0..=r[0].1 {
                    let i = [x, y, z];
                    if self.center(i).distance(center) <= radius {
                        self.set_blocked(i, true);
                    }
                }
            }
        }
    }

    /// Free voxel whose center is closest to `p`; ties go to the lowest index
    /// in z, y, x order.
    pub fn nearest_free(&self, p: Vec3) -> Option<VoxelIndex> {
        let mut best: Option<(f64, VoxelIndex)> = None;
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    let i = [x, y, z];
                    if self.is_blocked(i) {
                        continue;
                    }
                    let d = self.center(i).distance(p);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }

    /// Neighbours of `i` reachable in one move, with the move length in voxels.
    pub fn neighbours(&self, i: VoxelIndex) -> impl Iterator<Item = (VoxelIndex, f64)> + '_ {
        OFFSETS.iter().filter_map(move |&(d, len)| {
            let j = self.offset(i, d)?;
            if self.is_blocked(j) {
                return None;
            }
            // every partial step of a diagonal move must be free as well
            for mask in 1..7u8 {
                let partial = [
                    if mask & 1 != 0 { d[0] } else { 0 },
                    if mask & 2 != 0 { d[1] } else { 0 },
                    if mask & 4 != 0 { d[2] } else { 0 },
                ];
                if partial == [0, 0, 0] || partial == d {
                    continue;
                }
                let k = self.offset(i, partial)?;
                if self.is_blocked(k) {
                    return None;
                }
            }
            Some((j, len))
        })
    }

    fn offset(&self, i: VoxelIndex, d: [i8; 3]) -> Option<VoxelIndex> {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let v = i[k] as isize + d[k] as isize;
            if v < 0 || v >= self.dims[k] as isize {
                return None;
            }
            out[k] = v as usize;
        }
        Some(out)
    }
}

const S2: f64 = core::f64::consts::SQRT_2;
const S3: f64 = 1.732_050_807_568_877_2;

const OFFSETS: [([i8; 3], f64); 26] = {
    let mut out = [([0i8; 3], 0.0f64); 26];
    let mut n = 0;
    let mut z = -1i8;
    while z <= 1 {
        let mut y = -1i8;
        while y <= 1 {
            let mut x = -1i8;
            while x <= 1 {
                let nonzero = (x != 0) as u8 + (y != 0) as u8 + (z != 0) as u8;
                if nonzero > 0 {
                    let len = match nonzero {
                        1 => 1.0,
                        2 => S2,
                        _ => S3,
                    };
                    out[n] = ([x, y, z], len);
                    n += 1;
                }
                x += 1;
            }
            y += 1;
        }
        z += 1;
    }
    out
};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    index: VoxelIndex,
}

impl Eq for Open {}

impl Ord for Open {
    // reversed so the max-heap pops the smallest (f, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path between two free voxels. Returns the voxel sequence and its
/// length in meters.
pub fn astar(grid: &VoxelGrid, start: VoxelIndex, goal: VoxelIndex) -> Result<(Vec<VoxelIndex>, f64), RouteError> {
    if grid.is_blocked(start) {
        return Err(RouteError::RouteBlocked("start voxel is blocked"));
    }
    if grid.is_blocked(goal) {
        return Err(RouteError::RouteBlocked("goal voxel is blocked"));
    }
    let h = |i: VoxelIndex| {
        let d = |k: usize| i[k] as f64 - goal[k] as f64;
        sqrt(d(0) * d(0) + d(1) * d(1) + d(2) * d(2))
    };
    let n = grid.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    g[grid.flat(start)] = 0.0;
    heap.push(Open {
        f: h(start),
        g: 0.0,
        index: start,
    });
    while let Some(Open { g: gi, index, .. }) = heap.pop() {
        let fi = grid.flat(index);
        if closed[fi] {
            continue;
        }
        closed[fi] = true;
        if index == goal {
            let mut path = vec![index];
            let mut cur = fi;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(unflat(grid.dims, cur));
            }
            path.reverse();
            return Ok((path, gi * grid.voxel));
        }
        for (j, len) in grid.neighbours(index) {
            let fj = grid.flat(j);
            if closed[fj] {
                continue;
            }
            let cand = gi + len;
            if cand < g[fj] {
                g[fj] = cand;
                parent[fj] = fi;
                heap.push(Open {
                    f: cand + h(j),
                    g: cand,
                    index: j,
                });
            }
        }
    }
    Err(RouteError::RouteBlocked("goal unreachable"))
}

fn unflat(dims: [usize; 3], f: usize) -> VoxelIndex {
    [f % dims[0], (f / dims[0]) % dims[1], f / (dims[0] * dims[1])]
}

/// Plans a drone route from `start` to `goal` around geometry and flames.
pub fn plan_drone_route(
    scene: &Scene,
    flames: &[(Vec3, f64)],
    start: Vec3,
    goal: Vec3,
    config: RouteConfig,
) -> Result<RoutePlan, RouteError> {
    let grid = VoxelGrid::build(scene, flames, config)?;
    route_on(&grid, start, goal, config.clearance)
}

/// Routes between the voxels containing `start` and `goal` on a prepared grid.
pub fn route_on(grid: &VoxelGrid, start: Vec3, goal: Vec3, clearance: f64) -> Result<RoutePlan, RouteError> {
    let s = grid.index_of(start).ok_or(RouteError::OutOfBounds(start))?;
    let t = grid.index_of(goal).ok_or(RouteError::OutOfBounds(goal))?;
    let (path, total_length) = astar(grid, s, t)?;
    Ok(RoutePlan {
        waypoints: path.into_iter().map(|i| grid.center(i)).collect(),
        total_length,
        clearance,
    })
}

/// Separating-axis test between a triangle and a closed box; touching counts
/// as overlap.
pub fn triangle_overlaps_box(t: &Triangle, b: &Aabb) -> bool {
    let c = b.center();
    let e = b.size() * 0.5;
    let v = [t.a - c, t.b - c, t.c - c];
    let tol = 1e-12 * (1.0 + e.x + e.y + e.z);
    let separated = |axis: Vec3| {
        let p = [v[0].dot(axis), v[1].dot(axis), v[2].dot(axis)];
        let lo = p[0].min(p[1]).min(p[2]);
        let hi = p[0].max(p[1]).max(p[2]);
        let r = e.x * abs(axis.x) + e.y * abs(axis.y) + e.z * abs(axis.z);
        lo > r + tol || hi < -r - tol
    };
    for axis in [Vec3::X, Vec3::Y, Vec3::Z] {
        if separated(axis) {
            return false;
        }
    }
    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let n = edges[0].cross(edges[1]);
    if n.length_squared() > 0.0 && separated(n) {
        return false;
    }
    for edge in edges {
        for axis in [Vec3::X, Vec3::Y, Vec3::Z] {
            let a = edge.cross(axis);
            if a.length_squared() > 1e-30 && separated(a) {
                return false;
            }
        }
    }
    true
}
