//! Scene representation and the intersection kernel shared by every other module.
//!
//! Surfaces are triangle meshes. Triangles are single-sided: a ray only hits a
//! triangle whose front face (counter-clockwise winding, normal
//! `(b - a) x (c - a)`) points against the ray. Rooms are authored with
//! inward-facing surfaces, so a camera inside sees every wall while a ray
//! arriving from outside passes through the back of the ceiling.

mod index;
mod tessellate;

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub use crate::math::{Aabb, Vec3};
pub use index::PatchIndex;
pub use tessellate::{tessellate, Facet, Patch, PatchId, Tessellation};

/// Tolerance used for bounds checks on vertices.
const BOUNDS_TOL: f64 = 1e-9;
/// Rays ignore intersections closer than this to their origin.
pub const RAY_T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("scene has no collidable surface")]
    EmptyScene,
    #[error("surface {0} contains a degenerate triangle")]
    DegenerateTriangle(SurfaceId),
    #[error("surface {0} has no triangles")]
    NoTriangles(SurfaceId),
    #[error("duplicate surface id {0}")]
    DuplicateSurfaceId(SurfaceId),
    #[error("surface {0} has a vertex outside the scene bounds")]
    OutOfBounds(SurfaceId),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("ray direction must be unit length, got |d| = {0}")]
    NotUnitDirection(f64),
    #[error("patch size must be positive and finite, got {0}")]
    InvalidPatchSize(f64),
    #[error("triangle index {index} out of range for {vertices} vertices")]
    BadIndex { index: usize, vertices: usize },
}

/// Identifier of a surface within a scene; ordering doubles as the hit tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct SurfaceId(pub u32);

impl core::fmt::Display for SurfaceId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum SurfaceKind {
    Floor,
    Wall,
    Ceiling,
    Object,
}

impl SurfaceKind {
    /// Structural surfaces take part in coverage by default; loose objects do not.
    pub fn collidable_by_default(self) -> bool {
        !matches!(self, SurfaceKind::Object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Triangle {
    pub a: Vec3,
    pub b: Vec3,
    pub c: Vec3,
}

impl Triangle {
    pub const fn new(a: Vec3, b: Vec3, c: Vec3) -> Self {
        Self { a, b, c }
    }

    /// Non-normalized front-face normal; its length is twice the area.
    pub fn scaled_normal(&self) -> Vec3 {
        (self.b - self.a).cross(self.c - self.a)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.scaled_normal().length()
    }

    pub fn normal(&self) -> Option<Vec3> {
        self.scaled_normal().normalized()
    }

    pub fn vertices(&self) -> [Vec3; 3] {
        [self.a, self.b, self.c]
    }

    /// Front-face Moller-Trumbore test. Returns the ray parameter of the hit.
    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        let e1 = self.b - self.a;
        let e2 = self.c - self.a;
        let p = ray.direction.cross(e2);
        let det = e1.dot(p);
        // det > 0 means the ray travels against the front normal.
        let scale = e1.length() * e2.length();
        if det <= 1e-12 * scale {
            return None;
        }
        let inv = 1.0 / det;
        let s = ray.origin - self.a;
        let u = s.dot(p) * inv;
        const EDGE: f64 = 1e-12;
        if !(-EDGE..=1.0 + EDGE).contains(&u) {
            return None;
        }
        let q = s.cross(e1);
        let v = ray.direction.dot(q) * inv;
        if v < -EDGE || u + v > 1.0 + EDGE {
            return None;
        }
        let t = e2.dot(q) * inv;
        (t > RAY_T_MIN).then_some(t)
    }
}

/// One collidable (or occluding, or purely decorative) piece of the scene.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Surface {
    pub id: SurfaceId,
    pub kind: SurfaceKind,
    pub triangles: Vec<Triangle>,
    pub material_tag: String,
    /// Counted in the total area and tessellated into patches.
    pub collidable: bool,
    /// Blocks rays without contributing area. Only meaningful when not collidable.
    pub occluder: bool,
}

impl Surface {
    pub fn new(
        id: u32,
        kind: SurfaceKind,
        triangles: Vec<Triangle>,
        material_tag: impl Into<String>,
    ) -> Self {
        Self {
            id: SurfaceId(id),
            kind,
            triangles,
            material_tag: material_tag.into(),
            collidable: kind.collidable_by_default(),
            occluder: false,
        }
    }

    /// Builds a surface from flat `x, y, z` vertex coordinates and triangle index triples.
    pub fn from_indexed(
        id: u32,
        kind: SurfaceKind,
        vertices: &[f64],
        indices: &[[u32; 3]],
        material_tag: impl Into<String>,
    ) -> Result<Self, GeometryError> {
        if !vertices.len().is_multiple_of(3) {
            return Err(GeometryError::BadIndex {
                index: vertices.len(),
                vertices: vertices.len() / 3,
            });
        }
        let points: Vec<Vec3> = vertices.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let vertex = |i: u32| {
            points.get(i as usize).copied().ok_or(GeometryError::BadIndex {
                index: i as usize,
                vertices: points.len(),
            })
        };
        let triangles = indices
            .iter()
            .map(|t| Ok(Triangle::new(vertex(t[0])?, vertex(t[1])?, vertex(t[2])?)))
            .collect::<Result<Vec<_>, GeometryError>>()?;
        Ok(Surface::new(id, kind, triangles, material_tag))
    }

    pub fn with_collidable(mut self, collidable: bool) -> Self {
        self.collidable = collidable;
        self
    }

    pub fn with_occluder(mut self, occluder: bool) -> Self {
        self.occluder = occluder;
        self
    }

    /// Axis-aligned rectangle facing `normal_sign` along `axis`, built from two triangles.
    ///
    /// `axis` is 0, 1 or 2; the rectangle lies at `offset` along that axis and spans
    /// `lo..hi` in the other two axes (in increasing axis order).
    #[allow(clippy::too_many_arguments)]
    pub fn axis_rect(
        id: u32,
        kind: SurfaceKind,
        axis: usize,
        offset: f64,
        lo: (f64, f64),
        hi: (f64, f64),
        facing_positive: bool,
        material_tag: impl Into<String>,
    ) -> Self {
        let place = |p: f64, q: f64| -> Vec3 {
            match axis {
                0 => Vec3::new(offset, p, q),
                1 => Vec3::new(p, offset, q),
                _ => Vec3::new(p, q, offset),
            }
        };
        let a = place(lo.0, lo.1);
        let b = place(hi.0, lo.1);
        let c = place(hi.0, hi.1);
        let d = place(lo.0, hi.1);
        // (b - a) x (d - a) points along +axis for axes 0 and 2, -axis for axis 1.
        let natural_positive = axis != 1;
        let tris = if natural_positive == facing_positive {
            alloc::vec![Triangle::new(a, b, c), Triangle::new(a, c, d)]
        } else {
            alloc::vec![Triangle::new(a, c, b), Triangle::new(a, d, c)]
        };
        Surface::new(id, kind, tris, material_tag)
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(Triangle::area).sum()
    }

    pub fn blocks_rays(&self) -> bool {
        self.collidable || self.occluder
    }
}

/// Unit-direction ray.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Checked constructor; the direction must already be unit length.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        if !origin.is_finite() || !direction.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let len = direction.length();
        if (len - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NotUnitDirection(len));
        }
        Ok(Self { origin, direction })
    }

    /// Ray towards an arbitrary non-zero direction, normalized here.
    pub fn towards(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        let d = direction.normalized().ok_or(GeometryError::NotUnitDirection(0.0))?;
        Ray::new(origin, d)
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Nearest intersection with a ray-blocking surface, before patch lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Vec3,
    pub surface_id: SurfaceId,
    pub triangle: usize,
    pub distance: f64,
}

/// Ray hit resolved to a coverage patch. `patch_id` is `None` for occluder hits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Hit {
    pub point: Vec3,
    pub surface_id: SurfaceId,
    pub patch_id: Option<PatchId>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    surfaces: Vec<Surface>,
    bounds: Aabb,
}

impl Scene {
    /// Validates and builds a scene. When `bounds` is `None` the enclosing box of all
    /// vertices is used.
    pub fn new(mut surfaces: Vec<Surface>, bounds: Option<Aabb>) -> Result<Self, GeometryError> {
        surfaces.sort_by_key(|s| s.id);
        for w in surfaces.windows(2) {
            if w[0].id == w[1].id {
                return Err(GeometryError::DuplicateSurfaceId(w[0].id));
            }
        }
        for s in &surfaces {
            if s.triangles.is_empty() {
                return Err(GeometryError::NoTriangles(s.id));
            }
            for t in &s.triangles {
                if t.vertices().iter().any(|v| !v.is_finite()) {
                    return Err(GeometryError::NonFinite);
                }
                if !(t.area() > 0.0) {
                    return Err(GeometryError::DegenerateTriangle(s.id));
                }
            }
        }
        let bounds = match bounds {
            Some(b) => {
                if !b.min.is_finite() || !b.max.is_finite() {
                    return Err(GeometryError::NonFinite);
                }
                for s in &surfaces {
                    let inside = s
                        .triangles
                        .iter()
                        .flat_map(|t| t.vertices())
                        .all(|v| b.contains(v, BOUNDS_TOL));
                    if !inside {
                        return Err(GeometryError::OutOfBounds(s.id));
                    }
                }
                b
            }
            None => Aabb::enclosing(surfaces.iter().flat_map(|s| s.triangles.iter()).flat_map(|t| t.vertices()))
                .unwrap_or(Aabb::new(Vec3::ZERO, Vec3::ZERO)),
        };
        Ok(Self { surfaces, bounds })
    }

    /// Closed `width x depth x height` box room with its corner at the origin and
    /// every surface facing inwards. Ids: floor 0, ceiling 1, walls 2..=5.
    pub fn room(width: f64, depth: f64, height: f64, material_tag: &str) -> Result<Self, GeometryError> {
        let surfaces = room_surfaces(width, depth, height, material_tag, true);
        Scene::new(surfaces, Some(Aabb::new(Vec3::ZERO, Vec3::new(width, depth, height))))
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn surface(&self, id: SurfaceId) -> Option<&Surface> {
        self.surfaces
            .binary_search_by_key(&id, |s| s.id)
            .ok()
            .map(|i| &self.surfaces[i])
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn collidable(&self) -> impl Iterator<Item = &Surface> {
        self.surfaces.iter().filter(|s| s.collidable)
    }

    /// Total collidable area (S0).
    pub fn total_area(&self) -> Result<f64, GeometryError> {
        let mut any = false;
        let mut total = 0.0;
        for s in self.collidable() {
            any = true;
            total += s.area();
        }
        if any {
            Ok(total)
        } else {
            Err(GeometryError::EmptyScene)
        }
    }

    /// Nearest front-facing hit on a ray-blocking surface.
    ///
    /// Equal distances resolve to the lowest surface id, then the lowest triangle index.
    pub fn ray_cast(&self, ray: &Ray) -> Option<SurfaceHit> {
        let mut best: Option<(f64, SurfaceId, usize)> = None;
        for s in self.surfaces.iter().filter(|s| s.blocks_rays()) {
            for (ti, tri) in s.triangles.iter().enumerate() {
                if let Some(t) = tri.intersect(ray) {
                    if best.is_none_or(|(bt, _, _)| t < bt) {
                        best = Some((t, s.id, ti));
                    }
                }
            }
        }
        best.map(|(t, surface_id, triangle)| SurfaceHit {
            point: ray.at(t),
            surface_id,
            triangle,
            distance: t,
        })
    }
}

/// The six inward-facing surfaces of a box room; `with_ceiling = false` drops id 1.
pub fn room_surfaces(
    width: f64,
    depth: f64,
    height: f64,
    material_tag: &str,
    with_ceiling: bool,
) -> Vec<Surface> {
    use SurfaceKind::*;
    let mut v = alloc::vec![Surface::axis_rect(0, Floor, 2, 0.0, (0.0, 0.0), (width, depth), true, material_tag)];
    if with_ceiling {
        v.push(Surface::axis_rect(1, Ceiling, 2, height, (0.0, 0.0), (width, depth), false, material_tag));
    }
    v.push(Surface::axis_rect(2, Wall, 0, 0.0, (0.0, 0.0), (depth, height), true, material_tag));
    v.push(Surface::axis_rect(3, Wall, 0, width, (0.0, 0.0), (depth, height), false, material_tag));
    v.push(Surface::axis_rect(4, Wall, 1, 0.0, (0.0, 0.0), (width, height), true, material_tag));
    v.push(Surface::axis_rect(5, Wall, 1, depth, (0.0, 0.0), (width, height), false, material_tag));
    v
}

/// A scene together with its patch tessellation; the unit every consumer works on.
#[derive(Debug, Clone)]
pub struct PatchedScene {
    scene: Scene,
    tess: Tessellation,
}

impl PatchedScene {
    pub fn new(scene: Scene, patch_size: f64) -> Result<Self, GeometryError> {
        let tess = tessellate(&scene, patch_size)?;
        Ok(Self { scene, tess })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn tessellation(&self) -> &Tessellation {
        &self.tess
    }

    pub fn patches(&self) -> &[Patch] {
        self.tess.patches()
    }

    pub fn patch(&self, id: PatchId) -> Option<&Patch> {
        self.tess.patch(id)
    }

    /// S0; identical to [`Scene::total_area`] up to rounding.
    pub fn total_area(&self) -> f64 {
        self.tess.total_area()
    }

    pub fn ray_cast(&self, ray: &Ray) -> Option<Hit> {
        let sh = self.scene.ray_cast(ray)?;
        let patch_id = self.tess.locate(sh.surface_id, sh.triangle, sh.point);
        Some(Hit {
            point: sh.point,
            surface_id: sh.surface_id,
            patch_id,
            distance: sh.distance,
        })
    }

    pub fn patches_within_sphere(&self, center: Vec3, radius: f64) -> Vec<PatchId> {
        self.tess.patches_within_sphere(center, radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> Scene {
        Scene::room(10.0, 10.0, 3.0, "concrete").unwrap()
    }

    #[test]
    fn room_faces_point_inward() {
        let scene = room();
        let center = Vec3::new(5.0, 5.0, 1.5);
        for s in scene.surfaces() {
            for t in &s.triangles {
                let n = t.normal().unwrap();
                assert!(n.dot(center - t.a) > 0.0, "surface {} faces outward", s.id);
            }
        }
    }

    #[test]
    fn downward_ray_from_above_passes_ceiling_back() {
        let scene = room();
        let ray = Ray::new(Vec3::new(2.0, 3.0, 4.0), -Vec3::Z).unwrap();
        let hit = scene.ray_cast(&ray).unwrap();
        assert_eq!(hit.point, Vec3::new(2.0, 3.0, 0.0));
        assert_eq!(hit.distance, 4.0);
        assert_eq!(hit.surface_id, SurfaceId(0));
    }

    #[test]
    fn open_scene_has_no_hit_upwards() {
        let scene = Scene::new(room_surfaces(10.0, 10.0, 3.0, "c", false), None).unwrap();
        let ray = Ray::new(Vec3::new(5.0, 5.0, 1.0), Vec3::Z).unwrap();
        assert!(scene.ray_cast(&ray).is_none());
    }

    #[test]
    fn oblique_ray_hits_floor_at_closed_form_point() {
        let floor = Surface::axis_rect(0, SurfaceKind::Floor, 2, 0.0, (-10.0, -10.0), (10.0, 10.0), true, "c");
        let scene = Scene::new(alloc::vec![floor], None).unwrap();
        let ray = Ray::towards(Vec3::new(0.0, 0.0, 1.5), Vec3::new(1.0, 0.0, -1.0)).unwrap();
        let hit = scene.ray_cast(&ray).unwrap();
        assert!((hit.point.x - 1.5).abs() < 1e-12);
        assert!(hit.point.y.abs() < 1e-12);
        assert!(hit.point.z.abs() < 1e-12);
        assert!((hit.distance - 1.5 * core::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn total_area_of_closed_room() {
        assert_eq!(room().total_area().unwrap(), 320.0);
        let floor = Surface::axis_rect(0, SurfaceKind::Floor, 2, 0.0, (0.0, 0.0), (4.0, 5.0), true, "c");
        assert_eq!(Scene::new(alloc::vec![floor], None).unwrap().total_area().unwrap(), 20.0);
    }

    #[test]
    fn objects_do_not_count_towards_total_area() {
        let mut surfaces = room_surfaces(10.0, 10.0, 3.0, "c", true);
        surfaces.push(Surface::axis_rect(9, SurfaceKind::Object, 2, 1.0, (1.0, 1.0), (2.0, 2.0), true, "wood"));
        let scene = Scene::new(surfaces, None).unwrap();
        assert_eq!(scene.total_area().unwrap(), 320.0);
    }

    #[test]
    fn empty_scene_errors() {
        let obj = Surface::axis_rect(0, SurfaceKind::Object, 2, 1.0, (1.0, 1.0), (2.0, 2.0), true, "wood");
        let scene = Scene::new(alloc::vec![obj], None).unwrap();
        assert_eq!(scene.total_area(), Err(GeometryError::EmptyScene));
    }

    #[test]
    fn occluder_blocks_but_plain_object_does_not() {
        let mut surfaces = room_surfaces(10.0, 10.0, 3.0, "c", true);
        surfaces.push(Surface::axis_rect(9, SurfaceKind::Object, 2, 1.0, (1.0, 1.0), (3.0, 3.0), true, "wood"));
        let ray = Ray::new(Vec3::new(2.0, 2.0, 2.5), -Vec3::Z).unwrap();
        let scene = Scene::new(surfaces.clone(), None).unwrap();
        assert_eq!(scene.ray_cast(&ray).unwrap().surface_id, SurfaceId(0));
        surfaces[6].occluder = true;
        let scene = Scene::new(surfaces, None).unwrap();
        let hit = scene.ray_cast(&ray).unwrap();
        assert_eq!(hit.surface_id, SurfaceId(9));
        assert!((hit.distance - 1.5).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_lowest_surface_id() {
        let a = Surface::axis_rect(7, SurfaceKind::Floor, 2, 0.0, (0.0, 0.0), (1.0, 1.0), true, "c");
        let b = Surface::axis_rect(3, SurfaceKind::Floor, 2, 0.0, (0.0, 0.0), (1.0, 1.0), true, "c");
        let scene = Scene::new(alloc::vec![a, b], None).unwrap();
        let ray = Ray::new(Vec3::new(0.5, 0.5, 1.0), -Vec3::Z).unwrap();
        assert_eq!(scene.ray_cast(&ray).unwrap().surface_id, SurfaceId(3));
    }

    #[test]
    fn scene_validation() {
        let a = Surface::axis_rect(1, SurfaceKind::Floor, 2, 0.0, (0.0, 0.0), (1.0, 1.0), true, "c");
        assert_eq!(
            Scene::new(alloc::vec![a.clone(), a.clone()], None),
            Err(GeometryError::DuplicateSurfaceId(SurfaceId(1)))
        );
        let tight = Aabb::new(Vec3::ZERO, Vec3::new(0.5, 1.0, 1.0));
        assert_eq!(Scene::new(alloc::vec![a], Some(tight)), Err(GeometryError::OutOfBounds(SurfaceId(1))));
        let degenerate = Surface::new(
            2,
            SurfaceKind::Wall,
            alloc::vec![Triangle::new(Vec3::ZERO, Vec3::X, Vec3::X * 2.0)],
            "c",
        );
        assert_eq!(
            Scene::new(alloc::vec![degenerate], None),
            Err(GeometryError::DegenerateTriangle(SurfaceId(2)))
        );
    }

    #[test]
    fn ray_requires_unit_direction() {
        assert!(matches!(
            Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0)),
            Err(GeometryError::NotUnitDirection(_))
        ));
    }
}
