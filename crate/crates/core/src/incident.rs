//! Detection log records and symbolic rollback replay.
//!
//! The wire format (one JSON object per line) lives in the std companion crate;
//! this module only carries the typed record and the replay rule.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::geometry::PatchedScene;
use crate::localization::{localize, FireEvent, LocalizationError};

/// How long a replayed fire stays in the scene.
pub const REPLAY_LIFETIME_S: f64 = 30.0;

/// Naive wall-clock time with microsecond precision, counted from 1970-01-01 00:00:00.
///
/// No timezone is attached; the sensor log carries none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_micros(micros: i64) -> Self {
        Timestamp(micros)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    pub fn seconds_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1e6
    }

    pub fn abs_diff_seconds(self, other: Timestamp) -> f64 {
        self.0.abs_diff(other.0) as f64 / 1e6
    }

    pub fn plus_seconds(self, s: f64) -> Timestamp {
        Timestamp(self.0 + crate::math::round(s * 1e6) as i64)
    }
}

/// One sensor detection line.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectionRecord {
    pub fire_threat_level: String,
    pub start_datetime: Timestamp,
    /// Degrees Celsius.
    pub cpu_temperature: f64,
    /// May be empty; an empty id binds to the default sensor.
    pub sensor_id: String,
    /// Hottest pixel, zero-based from the top-left.
    pub column: u32,
    pub row: u32,
    /// Hottest pixel temperature, degrees Celsius.
    pub temperature: u32,
    /// Pixel count of the detected flame.
    pub number: u64,
    /// Unrecognised fields as `(name, raw JSON value)`, in input order.
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct RecordId(pub u64);

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ReplayEvent {
    pub source_record_id: RecordId,
    pub fire_event: FireEvent,
    pub lifetime: f64,
}

impl ReplayEvent {
    pub fn expires_at(&self, started: Timestamp) -> Timestamp {
        started.plus_seconds(self.lifetime)
    }
}

/// Re-runs localization on a stored record.
pub fn replay(
    scene: &PatchedScene,
    camera: &CameraPose,
    record_id: RecordId,
    record: &DetectionRecord,
    event_id: u64,
) -> Result<ReplayEvent, LocalizationError> {
    let fire_event = localize(scene, camera, record, event_id)?;
    Ok(ReplayEvent {
        source_record_id: record_id,
        fire_event,
        lifetime: REPLAY_LIFETIME_S,
    })
}
