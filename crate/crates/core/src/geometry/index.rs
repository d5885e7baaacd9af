use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{Patch, PatchId, Vec3};
use crate::math::floor;

/// Uniform bucket grid over patch centroids.
#[derive(Debug, Clone)]
pub struct PatchIndex {
    cell: f64,
    buckets: BTreeMap<(i64, i64, i64), Vec<PatchId>>,
    len: usize,
}

impl PatchIndex {
    pub fn build(patches: &[Patch], cell: f64) -> Self {
        let mut buckets: BTreeMap<(i64, i64, i64), Vec<PatchId>> = BTreeMap::new();
        for p in patches {
            buckets.entry(key(p.centroid, cell)).or_default().push(p.id);
        }
        Self {
            cell,
            buckets,
            len: patches.len(),
        }
    }

    /// Patches whose centroid lies within `radius` of `center` (inclusive), ascending by id.
    pub fn within_sphere(&self, patches: &[Patch], center: Vec3, radius: f64) -> Vec<PatchId> {
        if !(radius >= 0.0) {
            return Vec::new();
        }
        let r2 = radius * radius;
        let inside = |id: &PatchId| (patches[id.index()].centroid - center).length_squared() <= r2;
        let lo = key(center - Vec3::new(radius, radius, radius), self.cell);
        let hi = key(center + Vec3::new(radius, radius, radius), self.cell);
        let span = |a: i64, b: i64| (i128::from(b) - i128::from(a) + 1) as u128;
        let visits = span(lo.0, hi.0)
            .saturating_mul(span(lo.1, hi.1))
            .saturating_mul(span(lo.2, hi.2));
        let mut out: Vec<PatchId> = if visits > self.buckets.len() as u128 {
            // Cheaper to walk the occupied buckets than the box.
            self.buckets
                .iter()
                .filter(|(k, _)| {
                    (lo.0..=hi.0).contains(&k.0) && (lo.1..=hi.1).contains(&k.1) && (lo.2..=hi.2).contains(&k.2)
                })
                .flat_map(|(_, v)| v.iter().copied())
                .filter(|id| inside(id))
                .collect()
        } else {
            let mut v = Vec::new();
            for x in lo.0..=hi.0 {
                for y in lo.1..=hi.1 {
                    for z in lo.2..=hi.2 {
                        if let Some(ids) = self.buckets.get(&(x, y, z)) {
                            v.extend(ids.iter().copied().filter(|id| inside(id)));
                        }
                    }
                }
            }
            v
        };
        out.sort_unstable();
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn key(p: Vec3, cell: f64) -> (i64, i64, i64) {
    let f = |x: f64| floor(x / cell) as i64;
    (f(p.x), f(p.y), f(p.z))
}
