//! Recording CSV and session manifest formats.
//!
//! A recording is one CSV per device with header `timestamp_ms,channel,value`.
//! Timestamps are integer milliseconds since the epoch declared by the
//! session manifest, which also carries the labeled segment list.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ChannelId, EmotionLabel, Result, Segment, SessionSchedule, SignalError, TimeSeries};

pub const RECORDING_HEADER: [&str; 3] = ["timestamp_ms", "channel", "value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSegment {
    pub start_s: f64,
    pub end_s: f64,
    /// Label code 0-6.
    pub label: u8,
    #[serde(default)]
    pub clip_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    /// Free-form description of the global epoch all timestamps refer to.
    pub epoch: String,
    pub segments: Vec<ManifestSegment>,
}

impl SessionManifest {
    pub fn schedule(&self) -> Result<SessionSchedule> {
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let label = EmotionLabel::from_code(s.label).ok_or_else(|| {
                    SignalError::Schedule(format!("label code {} out of range 0-6", s.label))
                })?;
                Ok(Segment { start_s: s.start_s, end_s: s.end_s, label, clip_id: s.clip_id.clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = SessionSchedule { session_id: self.session_id.clone(), segments };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn from_schedule(schedule: &SessionSchedule, epoch: impl Into<String>) -> Self {
        Self {
            session_id: schedule.session_id.clone(),
            epoch: epoch.into(),
            segments: schedule
                .segments
                .iter()
                .map(|s| ManifestSegment {
                    start_s: s.start_s,
                    end_s: s.end_s,
                    label: s.label.code(),
                    clip_id: s.clip_id.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    timestamp_ms: i64,
    channel: String,
    value: f64,
}

/// Parses one device's recording into one series per channel.
pub fn read_recording<R: Read>(reader: R, device: &str) -> Result<Vec<TimeSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| SignalError::Ingest(format!("{device}: {e}")))?.clone();
    if headers.iter().collect::<Vec<_>>() != RECORDING_HEADER {
        return Err(SignalError::Ingest(format!(
            "{device}: expected header `timestamp_ms,channel,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut by_channel: BTreeMap<ChannelId, (Vec<i64>, Vec<f64>)> = BTreeMap::new();
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| SignalError::Ingest(format!("{device} row {}: {e}", line + 2)))?;
        let channel: ChannelId = row.channel.parse()?;
        let entry = by_channel.entry(channel).or_default();
        entry.0.push(row.timestamp_ms);
        entry.1.push(row.value);
    }
    if by_channel.is_empty() {
        return Err(SignalError::Ingest(format!("{device}: recording has no rows")));
    }
    by_channel
        .into_iter()
        .map(|(channel, (t, v))| TimeSeries::new(channel, device, t, v))
        .collect()
}

/// Writes series in the recording format, rows ordered by timestamp then channel.
pub fn write_recording<W: Write>(writer: W, series: &[TimeSeries]) -> Result<()> {
    let mut rows: Vec<(i64, ChannelId, f64)> = series
        .iter()
        .flat_map(|s| s.timestamps_ms().iter().zip(s.values()).map(move |(&t, &v)| (t, s.channel, v)))
        .collect();
    rows.sort_by_key(|&(t, c, _)| (t, c));
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| SignalError::Ingest(e.to_string());
    w.write_record(RECORDING_HEADER).map_err(io_err)?;
    for (t, c, v) in rows {
        w.write_record([t.to_string(), c.name().to_string(), v.to_string()]).map_err(io_err)?;
    }
    w.flush().map_err(|e| SignalError::Ingest(e.to_string()))?;
    Ok(())
}

/// One session as shipped between tools: manifest plus raw CSV per device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedSession {
    pub manifest: SessionManifest,
    /// Device name to recording CSV text.
    pub recordings: BTreeMap<String, String>,
}

impl RecordedSession {
    pub fn from_streams(manifest: SessionManifest, devices: &BTreeMap<String, Vec<TimeSeries>>) -> Result<Self> {
        let recordings = devices
            .iter()
            .map(|(device, series)| {
                let mut buf = Vec::new();
                write_recording(&mut buf, series)?;
                Ok((device.clone(), String::from_utf8(buf).expect("csv output is utf-8")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { manifest, recordings })
    }

    /// Parses every device recording; series come back grouped by device.
    pub fn streams(&self) -> Result<Vec<TimeSeries>> {
        let mut out = Vec::new();
        for (device, csv) in &self.recordings {
            out.extend(read_recording(csv.as_bytes(), device)?);
        }
        Ok(out)
    }
}
