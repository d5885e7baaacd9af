//! Std side of the wildfire situation-room twin.
//!
//! The algorithms live in [`ivsr_core`]; this crate adds the detection log
//! wire format and its durable store, the scene/sensor/material/library file
//! formats, the [`twin::Twin`] engine that wires everything together, and the
//! HTTP/WebSocket gateway in front of it.

pub mod files;
pub mod gateway;
pub mod store;
pub mod twin;
pub mod wire;

pub use ivsr_core as core;
