//! The sensor log line format: one JSON object per line, exact field names,
//! `CPUTemperature` as a number and the pixel fields as decimal strings.
//!
//! ```text
//! {"FireThreatLevel": "probable fire", "StartDateTime": "2024-03-17 07:05:36.137095", "CPUTemperature": 50.1, "SensorId": "", "Column": "107", "Row": "67", "Temperature": "107", "Number": "400"}
//! ```

use chrono::{DateTime, NaiveDateTime};
use ivsr_core::incident::{DetectionRecord, Timestamp};
use serde_json::{Map, Value};

const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.6f";

const THREAT: &str = "FireThreatLevel";
const START: &str = "StartDateTime";
const CPU: &str = "CPUTemperature";
const SENSOR: &str = "SensorId";
const COLUMN: &str = "Column";
const ROW: &str = "Row";
const TEMPERATURE: &str = "Temperature";
const NUMBER: &str = "Number";
const KNOWN: [&str; 8] = [THREAT, START, CPU, SENSOR, COLUMN, ROW, TEMPERATURE, NUMBER];

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("malformed JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema violation: {0}")]
    Schema(String),
}

fn schema(msg: impl Into<String>) -> WireError {
    WireError::Schema(msg.into())
}

pub fn parse_timestamp(s: &str) -> Result<Timestamp, WireError> {
    let t = NaiveDateTime::parse_from_str(s, TIME_FORMAT)
        .map_err(|e| schema(format!("{START} {s:?}: {e}")))?;
    let frac = s.rsplit_once('.').map(|(_, f)| f.len());
    if frac != Some(6) {
        return Err(schema(format!("{START} {s:?}: expected six fractional digits")));
    }
    Ok(Timestamp::from_micros(t.and_utc().timestamp_micros()))
}

pub fn format_timestamp(t: Timestamp) -> String {
    match DateTime::from_timestamp_micros(t.as_micros()) {
        Some(dt) => dt.naive_utc().format(TIME_FORMAT).to_string(),
        None => format!("{}", t.as_micros()),
    }
}

fn string_field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a str, WireError> {
    match obj.get(name) {
        Some(Value::String(s)) => Ok(s),
        Some(other) => Err(schema(format!("{name} must be a string, got {other}"))),
        None => Err(schema(format!("missing field {name}"))),
    }
}

fn digits<T: std::str::FromStr>(obj: &Map<String, Value>, name: &str) -> Result<T, WireError> {
    let s = string_field(obj, name)?;
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(schema(format!("{name} must be a decimal string, got {s:?}")));
    }
    s.parse().map_err(|_| schema(format!("{name} out of range: {s:?}")))
}

/// Parses one log line.
pub fn parse_detection(line: &str) -> Result<DetectionRecord, WireError> {
    let value: Value = serde_json::from_str(line.trim())?;
    let Value::Object(obj) = value else {
        return Err(schema("a detection must be a JSON object"));
    };
    let cpu = match obj.get(CPU) {
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| schema(format!("{CPU} is not a finite number")))?,
        Some(other) => return Err(schema(format!("{CPU} must be a number, got {other}"))),
        None => return Err(schema(format!("missing field {CPU}"))),
    };
    let extra = obj
        .iter()
        .filter(|(k, _)| !KNOWN.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.to_string()))
        .collect();
    Ok(DetectionRecord {
        fire_threat_level: string_field(&obj, THREAT)?.to_owned(),
        start_datetime: parse_timestamp(string_field(&obj, START)?)?,
        cpu_temperature: cpu,
        sensor_id: string_field(&obj, SENSOR)?.to_owned(),
        column: digits(&obj, COLUMN)?,
        row: digits(&obj, ROW)?,
        temperature: digits(&obj, TEMPERATURE)?,
        number: digits(&obj, NUMBER)?,
        extra,
    })
}

fn quote(s: &str) -> String {
    Value::String(s.to_owned()).to_string()
}

/// One log line in the sensor's own layout (`", "` and `": "` separators, fixed
/// field order, unknown fields last). No trailing newline.
pub fn serialize_detection(r: &DetectionRecord) -> String {
    let cpu = serde_json::Number::from_f64(r.cpu_temperature)
        .map(|n| n.to_string())
        .unwrap_or_else(|| "null".into());
    let mut fields = vec![
        (THREAT.to_owned(), quote(&r.fire_threat_level)),
        (START.to_owned(), quote(&format_timestamp(r.start_datetime))),
        (CPU.to_owned(), cpu),
        (SENSOR.to_owned(), quote(&r.sensor_id)),
        (COLUMN.to_owned(), quote(&r.column.to_string())),
        (ROW.to_owned(), quote(&r.row.to_string())),
        (TEMPERATURE.to_owned(), quote(&r.temperature.to_string())),
        (NUMBER.to_owned(), quote(&r.number.to_string())),
    ];
    fields.extend(r.extra.iter().map(|(k, v)| (k.clone(), pretty_extra(v))));
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("{}: {v}", quote(k))).collect();
    format!("{{{}}}", body.join(", "))
}

/// Re-emits a preserved raw value; anything that no longer parses is kept as a string.
fn pretty_extra(raw: &str) -> String {
    match serde_json::from_str::<Value>(raw) {
        Ok(v) => v.to_string(),
        Err(_) => quote(raw),
    }
}
