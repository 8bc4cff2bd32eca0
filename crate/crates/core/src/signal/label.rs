use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ChannelId, EmotionLabel, Result, SessionSchedule, SignalError, TimeSeries};

/// Uniformly sampled channels of one session with per-sample labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSignalSet {
    pub schedule: SessionSchedule,
    /// Sample times in seconds since the session epoch.
    pub times_s: Vec<f64>,
    pub channels: BTreeMap<ChannelId, Vec<f64>>,
    /// Index into `schedule.segments` of the containing segment.
    pub segment_of: Vec<Option<usize>>,
    pub excluded: Vec<bool>,
}

impl LabeledSignalSet {
    pub fn session_id(&self) -> &str {
        &self.schedule.session_id
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    pub fn label_at(&self, i: usize) -> Option<EmotionLabel> {
        self.segment_of[i].map(|s| self.schedule.segments[s].label)
    }

    pub fn clip_at(&self, i: usize) -> Option<&str> {
        self.segment_of[i].and_then(|s| self.schedule.segments[s].clip_id.as_deref())
    }

    /// Samples that carry a label and survive trimming.
    pub fn usable(&self, i: usize) -> bool {
        !self.excluded[i] && self.segment_of[i].is_some()
    }

    pub fn usable_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.usable(i)).count()
    }
}

/// Attaches schedule labels to resampled channels.
///
/// Every series in `grid` must share identical timestamps. A sample at time
/// `t` belongs to the segment with `start <= t < end`. The first `trim_s`
/// seconds of each non-rest segment and all samples outside segments are
/// marked excluded.
pub fn label_stream(
    grid: &[TimeSeries],
    schedule: &SessionSchedule,
    trim_s: f64,
) -> Result<LabeledSignalSet> {
    if !(trim_s >= 0.0) {
        return Err(SignalError::Config(format!("trim must be >= 0, got {trim_s}")));
    }
    schedule.validate()?;
    let first = grid.first().ok_or_else(|| SignalError::Ingest("no channels to label".into()))?;
    let mut channels = BTreeMap::new();
    for s in grid {
        if s.timestamps_ms() != first.timestamps_ms() {
            return Err(SignalError::Ingest(format!(
                "{} is not on the shared grid of {}",
                s.channel, first.channel
            )));
        }
        if channels.insert(s.channel, s.values().to_vec()).is_some() {
            return Err(SignalError::Ingest(format!("duplicate channel {}", s.channel)));
        }
    }

    let times_s: Vec<f64> = first.timestamps_ms().iter().map(|&t| t as f64 / 1000.0).collect();
    let period = if times_s.len() > 1 { times_s[1] - times_s[0] } else { 1.0 };
    let (t_first, t_last) = (times_s[0], *times_s.last().unwrap());
    for seg in &schedule.segments {
        if seg.start_s < t_first || seg.end_s > t_last + period + 1e-9 {
            return Err(SignalError::Schedule(format!(
                "segment [{}, {}) lies outside the recorded range [{t_first}, {})",
                seg.start_s,
                seg.end_s,
                t_last + period
            )));
        }
    }

    let mut segment_of = Vec::with_capacity(times_s.len());
    let mut excluded = Vec::with_capacity(times_s.len());
    let mut seg_idx = 0;
    for &t in &times_s {
        while seg_idx < schedule.segments.len() && schedule.segments[seg_idx].end_s <= t {
            seg_idx += 1;
        }
        match schedule.segments.get(seg_idx) {
            Some(seg) if seg.start_s <= t => {
                segment_of.push(Some(seg_idx));
                excluded.push(!seg.label.is_rest() && t < seg.start_s + trim_s);
            }
            _ => {
                segment_of.push(None);
                excluded.push(true);
            }
        }
    }

    Ok(LabeledSignalSet { schedule: schedule.clone(), times_s, channels, segment_of, excluded })
}
