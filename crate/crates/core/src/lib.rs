//! Core algorithms of a wildfire situation-room digital twin.
//!
//! Everything here is `no_std` with `alloc`: scene geometry and ray casting,
//! sensor coverage and placement, pixel localization, fire spread, the
//! scenario library with similarity matching, and the command loop with
//! its approval workflow and drone router. File formats, networking and the
//! CLI live in the `ivsr` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod camera;
pub mod command;
pub mod coverage;
pub mod geometry;
pub mod incident;
pub mod library;
pub mod localization;
pub mod spread;
pub mod status;

pub use math::{Aabb, Vec3};
