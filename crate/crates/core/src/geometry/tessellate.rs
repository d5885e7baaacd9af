//! Splits collidable surfaces into square cells ("patches") on their own plane.
//!
//! Each surface is grouped into planar facets. A facet gets an orthonormal
//! in-plane frame anchored at the minimum of its projected vertices, and the
//! frame is cut into `patch_size` squares. A patch is the part of the facet
//! inside one square; its area is the exact clipped polygon area, so patch
//! areas of a surface always sum to the surface area.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{GeometryError, PatchIndex, Scene, SurfaceId, Triangle, Vec3};
use crate::math::{ceil, floor};

/// Dense index into [`Tessellation::patches`], ordered by surface id, facet, then cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct PatchId(pub u32);

impl PatchId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Patch {
    pub id: PatchId,
    pub surface_id: SurfaceId,
    /// Planar facet of the surface the cell belongs to (0 for flat surfaces).
    pub facet: u32,
    pub cell_index: (u32, u32),
    pub centroid: Vec3,
    pub area: f64,
    pub material_tag: String,
}

/// Plane and in-plane frame of a group of coplanar triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub normal: Vec3,
    pub offset: f64,
    pub u: Vec3,
    pub v: Vec3,
    pub u_min: f64,
    pub v_min: f64,
    pub cols: u32,
    pub rows: u32,
}

impl Facet {
    fn cell_of(&self, p: Vec3, patch_size: f64) -> (u32, u32) {
        let s = (p.dot(self.u) - self.u_min) / patch_size;
        let t = (p.dot(self.v) - self.v_min) / patch_size;
        let clamp = |x: f64, n: u32| -> u32 {
            if x <= 0.0 {
                0
            } else {
                (floor(x) as u32).min(n - 1)
            }
        };
        (clamp(s, self.cols), clamp(t, self.rows))
    }
}

#[derive(Debug, Clone)]
struct SurfaceFacets {
    facets: Vec<Facet>,
    triangle_facet: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Tessellation {
    patch_size: f64,
    patches: Vec<Patch>,
    lookup: BTreeMap<(SurfaceId, u32, u32, u32), PatchId>,
    facets: BTreeMap<SurfaceId, SurfaceFacets>,
    surface_area: BTreeMap<SurfaceId, f64>,
    index: PatchIndex,
    total_area: f64,
}

impl Tessellation {
    pub fn patch_size(&self) -> f64 {
        self.patch_size
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch(&self, id: PatchId) -> Option<&Patch> {
        self.patches.get(id.index())
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn surface_area(&self, id: SurfaceId) -> Option<f64> {
        self.surface_area.get(&id).copied()
    }

    pub fn facets(&self, id: SurfaceId) -> Option<&[Facet]> {
        self.facets.get(&id).map(|f| f.facets.as_slice())
    }

    pub fn patch_at_cell(&self, surface: SurfaceId, facet: u32, cell: (u32, u32)) -> Option<PatchId> {
        self.lookup.get(&(surface, facet, cell.0, cell.1)).copied()
    }

    /// Patch containing `point`, which lies on triangle `triangle` of `surface`.
    ///
    /// Returns `None` when the surface was not tessellated (occluders).
    pub fn locate(&self, surface: SurfaceId, triangle: usize, point: Vec3) -> Option<PatchId> {
        let sf = self.facets.get(&surface)?;
        let facet_idx = *sf.triangle_facet.get(triangle)?;
        let facet = &sf.facets[facet_idx as usize];
        let cell = facet.cell_of(point, self.patch_size);
        if let Some(id) = self.patch_at_cell(surface, facet_idx, cell) {
            return Some(id);
        }
        // Cells whose clipped area vanished have no patch; fall back to the nearest
        // centroid on the same facet.
        self.patches
            .iter()
            .filter(|p| p.surface_id == surface && p.facet == facet_idx)
            .min_by(|a, b| {
                a.centroid
                    .distance(point)
                    .total_cmp(&b.centroid.distance(point))
                    .then(a.id.cmp(&b.id))
            })
            .map(|p| p.id)
    }

    /// Ids of the patches whose centroid is within `radius` of `center`, ascending.
    pub fn patches_within_sphere(&self, center: Vec3, radius: f64) -> Vec<PatchId> {
        self.index.within_sphere(&self.patches, center, radius)
    }

    pub fn index(&self) -> &PatchIndex {
        &self.index
    }
}

/// Tessellates every collidable surface of `scene` into cells of side `patch_size`.
pub fn tessellate(scene: &Scene, patch_size: f64) -> Result<Tessellation, GeometryError> {
    if !(patch_size > 0.0) || !patch_size.is_finite() {
        return Err(GeometryError::InvalidPatchSize(patch_size));
    }
    let mut patches = Vec::new();
    let mut lookup = BTreeMap::new();
    let mut facets = BTreeMap::new();
    let mut surface_area = BTreeMap::new();
    let mut total_area = 0.0;
    let mut any = false;

    for surface in scene.collidable() {
        any = true;
        let sf = group_facets(&surface.triangles, patch_size);
        // (facet, i, j) -> (area, area-weighted centroid sum)
        let mut cells: BTreeMap<(u32, u32, u32), (f64, Vec3)> = BTreeMap::new();
        for (tri, &fi) in surface.triangles.iter().zip(&sf.triangle_facet) {
            let facet = &sf.facets[fi as usize];
            clip_triangle_into_cells(tri, facet, patch_size, |i, j, area, centroid| {
                let e = cells.entry((fi, i, j)).or_insert((0.0, Vec3::ZERO));
                e.0 += area;
                e.1 += centroid * area;
            });
        }
        let area = surface.area();
        surface_area.insert(surface.id, area);
        total_area += area;
        for ((fi, i, j), (a, weighted)) in cells {
            if a <= 0.0 {
                continue;
            }
            let id = PatchId(patches.len() as u32);
            lookup.insert((surface.id, fi, i, j), id);
            patches.push(Patch {
                id,
                surface_id: surface.id,
                facet: fi,
                cell_index: (i, j),
                centroid: weighted / a,
                area: a,
                material_tag: surface.material_tag.clone(),
            });
        }
        facets.insert(surface.id, sf);
    }
    if !any {
        return Err(GeometryError::EmptyScene);
    }
    let index = PatchIndex::build(&patches, patch_size);
    Ok(Tessellation {
        patch_size,
        patches,
        lookup,
        facets,
        surface_area,
        index,
        total_area,
    })
}

fn group_facets(triangles: &[Triangle], patch_size: f64) -> SurfaceFacets {
    const NORMAL_TOL: f64 = 1e-9;
    const OFFSET_TOL: f64 = 1e-7;
    let mut planes: Vec<(Vec3, f64)> = Vec::new();
    let mut triangle_facet = Vec::with_capacity(triangles.len());
    for t in triangles {
        let n = t.normal().unwrap_or(Vec3::Z);
        let d = n.dot(t.a);
        let found = planes.iter().position(|&(pn, pd)| {
            let c = pn.dot(n);
            (c - 1.0).abs() < NORMAL_TOL && (pd - d).abs() < OFFSET_TOL
                || (c + 1.0).abs() < NORMAL_TOL && (pd + d).abs() < OFFSET_TOL
        });
        let idx = match found {
            Some(i) => i,
            None => {
                planes.push((n, d));
                planes.len() - 1
            }
        };
        triangle_facet.push(idx as u32);
    }
    let facets = planes
        .iter()
        .enumerate()
        .map(|(fi, &(n, d))| {
            let reference = if n.x.abs() > 0.9 { Vec3::Y } else { Vec3::X };
            let u = (reference - n * reference.dot(n)).normalized().unwrap_or(Vec3::X);
            let v = n.cross(u);
            let (mut u_min, mut u_max, mut v_min, mut v_max) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for (t, _) in triangles.iter().zip(&triangle_facet).filter(|(_, &f)| f as usize == fi) {
                for p in t.vertices() {
                    let (s, r) = (p.dot(u), p.dot(v));
                    u_min = u_min.min(s);
                    u_max = u_max.max(s);
                    v_min = v_min.min(r);
                    v_max = v_max.max(r);
                }
            }
            let count = |extent: f64| -> u32 { (ceil(extent / patch_size - 1e-9) as u32).max(1) };
            Facet {
                normal: n,
                offset: d,
                u,
                v,
                u_min,
                v_min,
                cols: count(u_max - u_min),
                rows: count(v_max - v_min),
            }
        })
        .collect();
    SurfaceFacets {
        facets,
        triangle_facet,
    }
}

/// Calls `emit(i, j, area, centroid)` for every cell the triangle overlaps.
fn clip_triangle_into_cells<F: FnMut(u32, u32, f64, Vec3)>(
    tri: &Triangle,
    facet: &Facet,
    patch_size: f64,
    mut emit: F,
) {
    let to2d = |p: Vec3| -> (f64, f64) { (p.dot(facet.u) - facet.u_min, p.dot(facet.v) - facet.v_min) };
    let poly = [to2d(tri.a), to2d(tri.b), to2d(tri.c)];
    let (mut s_lo, mut s_hi, mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(s, t) in &poly {
        s_lo = s_lo.min(s);
        s_hi = s_hi.max(s);
        t_lo = t_lo.min(t);
        t_hi = t_hi.max(t);
    }
    let cell_range = |lo: f64, hi: f64, n: u32| -> (u32, u32) {
        let a = (floor(lo / patch_size).max(0.0) as u32).min(n - 1);
        let b = (floor(hi / patch_size).max(0.0) as u32).min(n - 1);
        (a, b)
    };
    let (i0, i1) = cell_range(s_lo, s_hi, facet.cols);
    let (j0, j1) = cell_range(t_lo, t_hi, facet.rows);
    let mut buf_a: Vec<(f64, f64)> = Vec::with_capacity(8);
    let mut buf_b: Vec<(f64, f64)> = Vec::with_capacity(8);
    for i in i0..=i1 {
        // The last row/column absorbs anything numerically past the far edge.
        let s_min = if i == 0 { f64::NEG_INFINITY } else { i as f64 * patch_size };
        let s_max = if i + 1 == facet.cols { f64::INFINITY } else { (i + 1) as f64 * patch_size };
        for j in j0..=j1 {
            let t_min = if j == 0 { f64::NEG_INFINITY } else { j as f64 * patch_size };
            let t_max = if j + 1 == facet.rows { f64::INFINITY } else { (j + 1) as f64 * patch_size };
            buf_a.clear();
            buf_a.extend_from_slice(&poly);
            clip(&mut buf_a, &mut buf_b, |p| p.0 - s_min);
            clip(&mut buf_a, &mut buf_b, |p| s_max - p.0);
            clip(&mut buf_a, &mut buf_b, |p| p.1 - t_min);
            clip(&mut buf_a, &mut buf_b, |p| t_max - p.1);
            if buf_a.len() < 3 {
                continue;
            }
            let (area, cs, ct) = polygon_area_centroid(&buf_a);
            if area <= 0.0 {
                continue;
            }
            let centroid = facet.normal * facet.offset
                + facet.u * (cs + facet.u_min)
                + facet.v * (ct + facet.v_min);
            emit(i, j, area, centroid);
        }
    }
}

/// Sutherland-Hodgman against the half-plane `side(p) >= 0`; result left in `poly`.
fn clip<F: Fn((f64, f64)) -> f64>(poly: &mut Vec<(f64, f64)>, scratch: &mut Vec<(f64, f64)>, side: F) {
    if poly.is_empty() {
        return;
    }
    scratch.clear();
    let n = poly.len();
    for k in 0..n {
        let cur = poly[k];
        let prev = poly[(k + n - 1) % n];
        let dc = side(cur);
        let dp = side(prev);
        if dc.is_infinite() && dc > 0.0 {
            // Unbounded edge of a border cell.
            scratch.push(cur);
            continue;
        }
        if dc >= 0.0 {
            if dp < 0.0 {
                scratch.push(lerp2(prev, cur, dp / (dp - dc)));
            }
            scratch.push(cur);
        } else if dp >= 0.0 {
            scratch.push(lerp2(prev, cur, dp / (dp - dc)));
        }
    }
    core::mem::swap(poly, scratch);
}

fn lerp2(a: (f64, f64), b: (f64, f64), t: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

/// Unsigned area and centroid of a simple polygon.
fn polygon_area_centroid(poly: &[(f64, f64)]) -> (f64, f64, f64) {
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let n = poly.len();
    for k in 0..n {
        let (x0, y0) = poly[k];
        let (x1, y1) = poly[(k + 1) % n];
        let cross = x0 * y1 - x1 * y0;
        a2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if a2 == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let area = 0.5 * a2;
    (area.abs(), cx / (6.0 * area), cy / (6.0 * area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{room_surfaces, Surface, SurfaceKind};
    use alloc::vec;

    fn floor(w: f64, d: f64) -> Scene {
        Scene::new(
            vec![Surface::axis_rect(0, SurfaceKind::Floor, 2, 0.0, (0.0, 0.0), (w, d), true, "c")],
            None,
        )
        .unwrap()
    }

    #[test]
    fn unit_patches_on_ten_by_ten_floor() {
        let t = tessellate(&floor(10.0, 10.0), 1.0).unwrap();
        assert_eq!(t.patches().len(), 100);
        for p in t.patches() {
            assert!((p.area - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clipped_edge_cells_conserve_area() {
        let t = tessellate(&floor(10.0, 10.0), 3.0).unwrap();
        assert_eq!(t.patches().len(), 16);
        let sum: f64 = t.patches().iter().map(|p| p.area).sum();
        assert!((sum - 100.0).abs() < 1e-6);
        // corner cell is 1 x 1
        let corner = t.patches().iter().find(|p| p.cell_index == (3, 3)).unwrap();
        assert!((corner.area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_room_area() {
        let scene = Scene::new(room_surfaces(10.0, 10.0, 3.0, "c", true), None).unwrap();
        let t = tessellate(&scene, 0.25).unwrap();
        assert!((t.total_area() - 320.0).abs() < 1e-9);
        let sum: f64 = t.patches().iter().map(|p| p.area).sum();
        assert!((sum - 320.0).abs() < 1e-6);
    }

    #[test]
    fn centroids_lie_inside_their_cell() {
        let t = tessellate(&floor(2.0, 1.0), 0.5).unwrap();
        for p in t.patches() {
            let (i, j) = p.cell_index;
            assert!((p.centroid.x - (i as f64 + 0.5) * 0.5).abs() < 1e-12);
            assert!((p.centroid.y - (j as f64 + 0.5) * 0.5).abs() < 1e-12);
            assert_eq!(p.centroid.z, 0.0);
        }
    }

    #[test]
    fn locate_maps_points_to_cells() {
        let scene = floor(4.0, 4.0);
        let t = tessellate(&scene, 1.0).unwrap();
        let id = t.locate(SurfaceId(0), 0, Vec3::new(2.5, 1.5, 0.0)).unwrap();
        assert_eq!(t.patch(id).unwrap().cell_index, (2, 1));
        // far corner clamps into the last cell
        let id = t.locate(SurfaceId(0), 1, Vec3::new(4.0, 4.0, 0.0)).unwrap();
        assert_eq!(t.patch(id).unwrap().cell_index, (3, 3));
    }

    #[test]
    fn rejects_bad_patch_size() {
        assert_eq!(tessellate(&floor(1.0, 1.0), 0.0).unwrap_err(), GeometryError::InvalidPatchSize(0.0));
    }

    #[test]
    fn non_planar_surface_splits_into_facets() {
        // An L-shaped object made of a floor piece and a wall piece, marked collidable.
        let mut tris = Surface::axis_rect(0, SurfaceKind::Object, 2, 0.0, (0.0, 0.0), (1.0, 1.0), true, "w").triangles;
        tris.extend(Surface::axis_rect(0, SurfaceKind::Object, 0, 0.0, (0.0, 0.0), (1.0, 1.0), true, "w").triangles);
        let s = Surface::new(0, SurfaceKind::Object, tris, "w").with_collidable(true);
        let scene = Scene::new(vec![s], None).unwrap();
        let t = tessellate(&scene, 0.5).unwrap();
        assert_eq!(t.facets(SurfaceId(0)).unwrap().len(), 2);
        assert_eq!(t.patches().len(), 8);
        assert!((t.total_area() - 2.0).abs() < 1e-12);
    }
}
