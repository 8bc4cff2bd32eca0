//! Biosignal ingestion and preprocessing.
//!
//! Raw streams arrive per device with their own sampling rates and gaps. They
//! are referenced to one global clock, resampled on a shared grid, smoothed,
//! z-scored per session and labeled from the session schedule.
//!
//! Standard deviations are the sample (n - 1) definition throughout the crate.

mod filter;
pub mod io;
mod label;
mod normalize;
pub mod pipeline;
mod resample;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::median_filter;
pub use label::{label_stream, LabeledSignalSet};
pub use normalize::{normalize_session, Normalized, DEGENERATE_STD};
pub use resample::align_and_resample;

/// Default trim at the start of every emotion segment, in seconds.
pub const DEFAULT_TRIM_S: u32 = 15;
/// Default resampling rate in Hz.
pub const DEFAULT_TARGET_RATE: f64 = 1.0;
/// Median filter order applied to GSR.
pub const GSR_MEDIAN_ORDER: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("ingest error: {0}")]
    Ingest(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("schedule error: {0}")]
    Schedule(String),
}

pub type Result<T, E = SignalError> = std::result::Result<T, E>;

/// The six physiological channels handled by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    HR,
    HRV,
    HRP,
    BR,
    GSR,
    SKT,
}

impl ChannelId {
    pub const ALL: [ChannelId; 6] = [
        ChannelId::HR,
        ChannelId::HRV,
        ChannelId::HRP,
        ChannelId::BR,
        ChannelId::GSR,
        ChannelId::SKT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::HR => "HR",
            ChannelId::HRV => "HRV",
            ChannelId::HRP => "HRP",
            ChannelId::BR => "BR",
            ChannelId::GSR => "GSR",
            ChannelId::SKT => "SKT",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Skin temperature drifts monotonically within a session and leaks the
    /// session position into the target.
    pub fn is_leak_prone(self) -> bool {
        matches!(self, ChannelId::SKT)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelId {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self> {
        ChannelId::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SignalError::Ingest(format!("unknown channel `{s}`")))
    }
}

/// Emotion labels with their fixed integer codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmotionLabel {
    Rest = 0,
    Fear = 1,
    SadAnger = 2,
    AweRev = 3,
    Disgust = 4,
    JoyAmus = 5,
    Content = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Valence {
    Negative,
    Positive,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Rest,
        EmotionLabel::Fear,
        EmotionLabel::SadAnger,
        EmotionLabel::AweRev,
        EmotionLabel::Disgust,
        EmotionLabel::JoyAmus,
        EmotionLabel::Content,
    ];

    /// The six targeted emotions, in code order.
    pub const EMOTIONS: [EmotionLabel; 6] = [
        EmotionLabel::Fear,
        EmotionLabel::SadAnger,
        EmotionLabel::AweRev,
        EmotionLabel::Disgust,
        EmotionLabel::JoyAmus,
        EmotionLabel::Content,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        EmotionLabel::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Rest => "Rest",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::SadAnger => "SadAnger",
            EmotionLabel::AweRev => "AweRev",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::JoyAmus => "JoyAmus",
            EmotionLabel::Content => "Content",
        }
    }

    /// `None` for `Rest`.
    pub fn valence(self) -> Option<Valence> {
        match self {
            EmotionLabel::Rest => None,
            EmotionLabel::Fear | EmotionLabel::SadAnger | EmotionLabel::Disgust => {
                Some(Valence::Negative)
            }
            EmotionLabel::AweRev | EmotionLabel::JoyAmus | EmotionLabel::Content => {
                Some(Valence::Positive)
            }
        }
    }

    pub fn is_rest(self) -> bool {
        self == EmotionLabel::Rest
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if let Ok(code) = s.parse::<u8>() {
            return EmotionLabel::from_code(code).ok_or_else(|| format!("bad label code {code}"));
        }
        EmotionLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown emotion `{s}`"))
    }
}

/// One channel's timestamped samples from one device.
///
/// Timestamps are milliseconds since the session's global epoch and are
/// strictly increasing; values are finite. Construct through [`TimeSeries::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub channel: ChannelId,
    pub device: String,
    timestamps_ms: Vec<i64>,
    values: Vec<f64>,
    pub sample_rate_hint: Option<f64>,
}

impl TimeSeries {
    pub fn new(
        channel: ChannelId,
        device: impl Into<String>,
        timestamps_ms: Vec<i64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if timestamps_ms.len() != values.len() {
            return Err(SignalError::Ingest(format!(
                "{channel}: {} timestamps but {} values",
                timestamps_ms.len(),
                values.len()
            )));
        }
        if timestamps_ms.is_empty() {
            return Err(SignalError::Ingest(format!("{channel}: empty stream")));
        }
        if let Some(w) = timestamps_ms.windows(2).find(|w| w[1] <= w[0]) {
            return Err(SignalError::Ingest(format!(
                "{channel}: timestamps not strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(SignalError::Ingest(format!("{channel}: non-finite value {v}")));
        }
        Ok(Self {
            channel,
            device: device.into(),
            timestamps_ms,
            values,
            sample_rate_hint: None,
        })
    }

    pub fn from_pairs(
        channel: ChannelId,
        device: impl Into<String>,
        samples: &[(i64, f64)],
    ) -> Result<Self> {
        let (t, v) = samples.iter().copied().unzip();
        Self::new(channel, device, t, v)
    }

    pub fn with_rate_hint(mut self, hz: f64) -> Self {
        self.sample_rate_hint = Some(hz);
        self
    }

    pub fn timestamps_ms(&self) -> &[i64] {
        &self.timestamps_ms
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_ms(&self) -> i64 {
        self.timestamps_ms[0]
    }

    pub fn last_ms(&self) -> i64 {
        *self.timestamps_ms.last().expect("non-empty")
    }

    /// Same timestamps, new values. Used by the value-wise transforms.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            channel: self.channel,
            device: self.device.clone(),
            timestamps_ms: self.timestamps_ms.clone(),
            values,
            sample_rate_hint: self.sample_rate_hint,
        }
    }
}

/// One labeled interval of a session, in seconds since the session epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub label: EmotionLabel,
    pub clip_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSchedule {
    pub session_id: String,
    pub segments: Vec<Segment>,
}

impl SessionSchedule {
    /// Checks ordering, overlap and clip attribution.
    pub fn validate(&self) -> Result<()> {
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.start_s.is_finite() && seg.end_s.is_finite()) || seg.end_s <= seg.start_s {
                return Err(SignalError::Schedule(format!(
                    "segment {i} has empty or invalid span [{}, {})",
                    seg.start_s, seg.end_s
                )));
            }
            if !seg.label.is_rest() && seg.clip_id.is_none() {
                return Err(SignalError::Schedule(format!(
                    "segment {i} ({}) carries no clip_id",
                    seg.label
                )));
            }
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            if pair[1].start_s < pair[0].end_s {
                return Err(SignalError::Schedule(format!(
                    "segments {} and {} overlap or are out of order",
                    i,
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_codes_match_table() {
        let codes: Vec<u8> = EmotionLabel::ALL.iter().map(|l| l.code()).collect();
        assert_eq!(codes, vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(EmotionLabel::from_code(4), Some(EmotionLabel::Disgust));
        assert_eq!(EmotionLabel::from_code(7), None);
        assert_eq!("5".parse::<EmotionLabel>(), Ok(EmotionLabel::JoyAmus));
        assert_eq!("awerev".parse::<EmotionLabel>(), Ok(EmotionLabel::AweRev));
    }

    #[test]
    fn only_skt_is_leak_prone() {
        let leaky: Vec<_> = ChannelId::ALL.into_iter().filter(|c| c.is_leak_prone()).collect();
        assert_eq!(leaky, vec![ChannelId::SKT]);
    }

    #[test]
    fn time_series_rejects_bad_input() {
        assert!(TimeSeries::new(ChannelId::HR, "d", vec![], vec![]).is_err());
        assert!(TimeSeries::new(ChannelId::HR, "d", vec![0, 0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(ChannelId::HR, "d", vec![5, 1], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(ChannelId::HR, "d", vec![0], vec![f64::NAN]).is_err());
        assert!(TimeSeries::new(ChannelId::HR, "d", vec![0, 1], vec![1.0]).is_err());
    }

    #[test]
    fn schedule_overlap_detected() {
        let seg = |a: f64, b: f64| Segment {
            start_s: a,
            end_s: b,
            label: EmotionLabel::Fear,
            clip_id: Some("c".into()),
        };
        let ok = SessionSchedule { session_id: "s".into(), segments: vec![seg(0.0, 10.0), seg(10.0, 20.0)] };
        assert!(ok.validate().is_ok());
        let bad = SessionSchedule { session_id: "s".into(), segments: vec![seg(0.0, 10.0), seg(5.0, 20.0)] };
        assert!(matches!(bad.validate(), Err(SignalError::Schedule(_))));
        let no_clip = SessionSchedule {
            session_id: "s".into(),
            segments: vec![Segment { clip_id: None, ..seg(0.0, 1.0) }],
        };
        assert!(no_clip.validate().is_err());
    }
}
