//! Append-only detection log: one wire line per record on disk, an in-memory
//! index for queries.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use ivsr_core::camera::CameraPose;
use ivsr_core::geometry::PatchedScene;
use ivsr_core::incident::{self, DetectionRecord, RecordId, ReplayEvent, Timestamp};
use ivsr_core::localization::LocalizationError;

use crate::wire::{parse_detection, serialize_detection, WireError};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("log I/O failed: {0}")]
    Storage(#[from] std::io::Error),
    #[error("{path}:{line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: WireError,
    },
    #[error("no record {0:?}")]
    NotFound(RecordId),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
}

#[derive(Debug)]
pub struct IncidentStore {
    file: Option<File>,
    path: Option<PathBuf>,
    records: Vec<DetectionRecord>,
}

impl IncidentStore {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self {
            file: None,
            path: None,
            records: Vec::new(),
        }
    }

    /// Opens (or creates) a log file, loading the lines already in it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(&file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = parse_detection(&line).map_err(|source| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                source,
            })?;
            records.push(rec);
        }
        Ok(Self {
            file: Some(file),
            path: Some(path),
            records,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes and syncs the record before indexing it. Ids start at 1.
    pub fn append(&mut self, record: DetectionRecord) -> Result<RecordId, StoreError> {
        if let Some(f) = &mut self.file {
            let mut line = serialize_detection(&record);
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
            f.sync_data()?;
        }
        self.records.push(record);
        Ok(RecordId(self.records.len() as u64))
    }

    pub fn get(&self, id: RecordId) -> Option<&DetectionRecord> {
        let i = usize::try_from(id.0).ok()?.checked_sub(1)?;
        self.records.get(i)
    }

    /// Records with `start_datetime` inside `range`, oldest first; equal
    /// timestamps keep insertion order. `sensor` filters on `SensorId`.
    pub fn query(
        &self,
        range: RangeInclusive<Timestamp>,
        sensor: Option<&str>,
    ) -> Vec<(RecordId, &DetectionRecord)> {
        let mut out: Vec<_> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| range.contains(&r.start_datetime))
            .filter(|(_, r)| sensor.is_none_or(|s| r.sensor_id == s))
            .map(|(i, r)| (RecordId(i as u64 + 1), r))
            .collect();
        out.sort_by_key(|(_, r)| r.start_datetime);
        out
    }

    /// Re-localizes a stored record through `camera`.
    pub fn replay(
        &self,
        id: RecordId,
        scene: &PatchedScene,
        camera: &CameraPose,
        event_id: u64,
    ) -> Result<ReplayEvent, StoreError> {
        let rec = self.get(id).ok_or(StoreError::NotFound(id))?;
        Ok(incident::replay(scene, camera, id, rec, event_id)?)
    }
}
