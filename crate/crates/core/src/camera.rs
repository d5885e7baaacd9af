//! Pinhole camera model shared by coverage estimation and fire localization.
//!
//! Orientation: yaw about +Z (counter-clockwise from +X), then pitch about the
//! camera's right axis (positive looks up), then roll about the optical axis.
//! At zero angles the camera looks along +X with +Z up. Pixel (0, 0) is the
//! top-left pixel; columns grow to the right and rows grow downwards.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::{Ray, Vec3};
use crate::math::{cos, floor, sin, tan, to_radians};

pub const DEFAULT_PIXEL_COLS: u32 = 160;
pub const DEFAULT_PIXEL_ROWS: u32 = 120;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CameraError {
    #[error("field of view must lie strictly between 0 and 180 degrees")]
    BadFov,
    #[error("pixel grid must be at least 1 x 1")]
    EmptyPixelGrid,
    #[error("camera pose has a non-finite value")]
    NonFinite,
    #[error("pixel ({column}, {row}) outside {cols} x {rows} grid")]
    PixelOutOfRange { column: u32, row: u32, cols: u32, rows: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CameraPose {
    pub position: Vec3,
    /// Degrees.
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub h_fov: f64,
    pub v_fov: f64,
    pub pixel_cols: u32,
    pub pixel_rows: u32,
}

/// World-space orthonormal basis of a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewBasis {
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    /// tan(h_fov / 2), tan(v_fov / 2)
    pub half_extent: (f64, f64),
}

impl CameraPose {
    pub fn new(position: Vec3, yaw: f64, pitch: f64, roll: f64, h_fov: f64, v_fov: f64) -> Self {
        Self {
            position,
            yaw,
            pitch,
            roll,
            h_fov,
            v_fov,
            pixel_cols: DEFAULT_PIXEL_COLS,
            pixel_rows: DEFAULT_PIXEL_ROWS,
        }
    }

    pub fn with_pixels(mut self, cols: u32, rows: u32) -> Self {
        self.pixel_cols = cols;
        self.pixel_rows = rows;
        self
    }

    /// Camera straight down (pitch -90 degrees) with image-up along +X.
    pub fn looking_down(position: Vec3, h_fov: f64, v_fov: f64) -> Self {
        Self::new(position, 0.0, -90.0, 0.0, h_fov, v_fov)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let vals = [self.yaw, self.pitch, self.roll, self.h_fov, self.v_fov];
        if !self.position.is_finite() || vals.iter().any(|v| !v.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        if !(self.h_fov > 0.0 && self.h_fov < 180.0 && self.v_fov > 0.0 && self.v_fov < 180.0) {
            return Err(CameraError::BadFov);
        }
        if self.pixel_cols == 0 || self.pixel_rows == 0 {
            return Err(CameraError::EmptyPixelGrid);
        }
        Ok(())
    }

    pub fn basis(&self) -> ViewBasis {
        let (y, p, r) = (to_radians(self.yaw), to_radians(self.pitch), to_radians(self.roll));
        let forward = Vec3::new(cos(p) * cos(y), cos(p) * sin(y), sin(p));
        let right0 = Vec3::new(sin(y), -cos(y), 0.0);
        let up0 = right0.cross(forward);
        let right = right0 * cos(r) + up0 * sin(r);
        let up = up0 * cos(r) - right0 * sin(r);
        ViewBasis {
            forward,
            right,
            up,
            half_extent: (tan(to_radians(self.h_fov) * 0.5), tan(to_radians(self.v_fov) * 0.5)),
        }
    }

    /// Ray through normalized image coordinates, `x` to the right and `y` up, both in [-1, 1].
    pub fn ray_through_ndc(&self, x: f64, y: f64) -> Ray {
        let b = self.basis();
        let d = b.forward + b.right * (x * b.half_extent.0) + b.up * (y * b.half_extent.1);
        Ray {
            origin: self.position,
            direction: d / d.length(),
        }
    }

    /// Ray through the center of pixel `(column, row)`.
    pub fn pixel_to_ray(&self, column: u32, row: u32) -> Result<Ray, CameraError> {
        if column >= self.pixel_cols || row >= self.pixel_rows {
            return Err(CameraError::PixelOutOfRange {
                column,
                row,
                cols: self.pixel_cols,
                rows: self.pixel_rows,
            });
        }
        let (x, y) = cell_center_ndc(column, row, self.pixel_cols, self.pixel_rows);
        Ok(self.ray_through_ndc(x, y))
    }

    /// Normalized image coordinates of a world point, `None` when it is behind the camera.
    pub fn project_ndc(&self, point: Vec3) -> Option<(f64, f64)> {
        let b = self.basis();
        let d = point - self.position;
        let depth = d.dot(b.forward);
        if depth <= 0.0 {
            return None;
        }
        Some((
            d.dot(b.right) / (depth * b.half_extent.0),
            d.dot(b.up) / (depth * b.half_extent.1),
        ))
    }

    /// Pixel containing the projection of `point`, if it falls inside the image.
    pub fn project_to_pixel(&self, point: Vec3) -> Option<(u32, u32)> {
        let (x, y) = self.project_ndc(point)?;
        if !(-1.0..=1.0).contains(&x) || !(-1.0..=1.0).contains(&y) {
            return None;
        }
        let col = floor((x + 1.0) * 0.5 * f64::from(self.pixel_cols)) as u32;
        let row = floor((1.0 - y) * 0.5 * f64::from(self.pixel_rows)) as u32;
        Some((col.min(self.pixel_cols - 1), row.min(self.pixel_rows - 1)))
    }

    /// `n * n` rays through the cell centers of a uniform grid on the view plane,
    /// row-major from the top-left cell.
    pub fn ray_grid(&self, n: u32) -> Vec<Ray> {
        let b = self.basis();
        let mut rays = Vec::with_capacity((n as usize) * (n as usize));
        for row in 0..n {
            for col in 0..n {
                let (x, y) = cell_center_ndc(col, row, n, n);
                let d = b.forward + b.right * (x * b.half_extent.0) + b.up * (y * b.half_extent.1);
                rays.push(Ray {
                    origin: self.position,
                    direction: d / d.length(),
                });
            }
        }
        rays
    }
}

/// Free-function form of [`CameraPose::ray_grid`].
pub fn ray_grid(camera: &CameraPose, n: u32) -> Vec<Ray> {
    camera.ray_grid(n)
}

/// NDC center of cell `(col, row)` in a `cols x rows` grid with row 0 at the top.
fn cell_center_ndc(col: u32, row: u32, cols: u32, rows: u32) -> (f64, f64) {
    let x = (f64::from(col) + 0.5) / f64::from(cols) * 2.0 - 1.0;
    let y = 1.0 - (f64::from(row) + 0.5) / f64::from(rows) * 2.0;
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).length() < tol
    }

    #[test]
    fn identity_basis() {
        let cam = CameraPose::new(Vec3::ZERO, 0.0, 0.0, 0.0, 90.0, 90.0);
        let b = cam.basis();
        assert!(close(b.forward, Vec3::X, 1e-15));
        assert!(close(b.right, -Vec3::Y, 1e-15));
        assert!(close(b.up, Vec3::Z, 1e-15));
    }

    #[test]
    fn basis_is_orthonormal_under_roll() {
        let cam = CameraPose::new(Vec3::ZERO, 33.0, -20.0, 47.0, 60.0, 45.0);
        let b = cam.basis();
        for v in [b.forward, b.right, b.up] {
            assert!((v.length() - 1.0).abs() < 1e-12);
        }
        assert!(b.forward.dot(b.right).abs() < 1e-12);
        assert!(b.forward.dot(b.up).abs() < 1e-12);
        assert!(b.right.dot(b.up).abs() < 1e-12);
    }

    #[test]
    fn single_ray_grid_is_optical_axis() {
        let cam = CameraPose::new(Vec3::ZERO, 30.0, 10.0, 0.0, 60.0, 40.0);
        let rays = cam.ray_grid(1);
        assert_eq!(rays.len(), 1);
        assert!(close(rays[0].direction, cam.basis().forward, 1e-15));
    }

    #[test]
    fn hundred_rays_for_ten_grid() {
        let cam = CameraPose::new(Vec3::ZERO, 0.0, 0.0, 0.0, 60.0, 40.0);
        assert_eq!(cam.ray_grid(10).len(), 100);
    }

    #[test]
    fn two_by_two_grid_hits_quadrant_centers() {
        // tan(45) = 1, cell centers at ndc +-0.5 -> direction (1, -+0.5, +-0.5)/sqrt(1.5)
        let cam = CameraPose::new(Vec3::ZERO, 0.0, 0.0, 0.0, 90.0, 90.0);
        let rays = cam.ray_grid(2);
        let s = 1.0 / 1.5f64.sqrt();
        let expect = [
            Vec3::new(1.0, 0.5, 0.5) * s,   // top-left: left is +Y
            Vec3::new(1.0, -0.5, 0.5) * s,  // top-right
            Vec3::new(1.0, 0.5, -0.5) * s,  // bottom-left
            Vec3::new(1.0, -0.5, -0.5) * s, // bottom-right
        ];
        for (r, e) in rays.iter().zip(expect) {
            assert!(close(r.direction, e, 1e-12), "{:?} vs {:?}", r.direction, e);
        }
    }

    #[test]
    fn center_pixel_of_odd_grid_is_axis() {
        let cam = CameraPose::new(Vec3::ZERO, 10.0, -30.0, 5.0, 70.0, 50.0).with_pixels(161, 121);
        let ray = cam.pixel_to_ray(80, 60).unwrap();
        assert!(close(ray.direction, cam.basis().forward, 1e-14));
    }

    #[test]
    fn pixel_out_of_range() {
        let cam = CameraPose::new(Vec3::ZERO, 0.0, 0.0, 0.0, 90.0, 60.0);
        assert!(matches!(cam.pixel_to_ray(160, 0), Err(CameraError::PixelOutOfRange { .. })));
        assert!(matches!(cam.pixel_to_ray(0, 120), Err(CameraError::PixelOutOfRange { .. })));
    }

    #[test]
    fn validation() {
        let mut cam = CameraPose::new(Vec3::ZERO, 0.0, 0.0, 0.0, 180.0, 60.0);
        assert_eq!(cam.validate(), Err(CameraError::BadFov));
        cam.h_fov = 90.0;
        assert_eq!(cam.validate(), Ok(()));
        cam.pixel_rows = 0;
        assert_eq!(cam.validate(), Err(CameraError::EmptyPixelGrid));
    }
}
