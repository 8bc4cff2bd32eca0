use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FeatureError, Result, DEFAULT_WINDOW};
use crate::signal::{ChannelId, EmotionLabel, LabeledSignalSet};

/// Non-overlapping windows of `w` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub w: usize,
}

impl WindowConfig {
    pub fn new(w: usize) -> Result<Self> {
        if w < 2 {
            return Err(FeatureError::Config(format!("window length must be >= 2, got {w}")));
        }
        Ok(Self { w })
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { w: DEFAULT_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub session_id: String,
    pub label: EmotionLabel,
    pub clip_id: Option<String>,
    pub start_s: f64,
    pub channels: BTreeMap<ChannelId, Vec<f64>>,
}

/// Cuts each maximal run of usable samples sharing (label, clip) into
/// consecutive windows of exactly `w` samples from the run start. A partial
/// tail is dropped.
pub fn cut_windows(signals: &LabeledSignalSet, cfg: &WindowConfig) -> Vec<Window> {
    let w = cfg.w;
    let mut windows = Vec::new();
    let n = signals.len();
    let mut i = 0;
    while i < n {
        if !signals.usable(i) {
            i += 1;
            continue;
        }
        let key = (signals.label_at(i), signals.clip_at(i));
        let mut end = i + 1;
        while end < n && signals.usable(end) && (signals.label_at(end), signals.clip_at(end)) == key {
            end += 1;
        }
        let mut start = i;
        while start + w <= end {
            windows.push(Window {
                session_id: signals.session_id().to_string(),
                label: key.0.expect("usable samples are labeled"),
                clip_id: key.1.map(str::to_string),
                start_s: signals.times_s[start],
                channels: signals
                    .channels
                    .iter()
                    .map(|(c, v)| (*c, v[start..start + w].to_vec()))
                    .collect(),
            });
            start += w;
        }
        i = end;
    }
    windows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{label_stream, Segment, SessionSchedule, TimeSeries};

    fn labeled(segments: Vec<(f64, f64, EmotionLabel)>, trim: f64) -> LabeledSignalSet {
        let len = segments.last().unwrap().1 as i64;
        let t: Vec<i64> = (0..len).map(|i| i * 1000).collect();
        let grid = vec![TimeSeries::new(ChannelId::HR, "c", t, (0..len).map(|i| i as f64).collect()).unwrap()];
        let schedule = SessionSchedule {
            session_id: "s".into(),
            segments: segments
                .into_iter()
                .enumerate()
                .map(|(k, (a, b, l))| Segment {
                    start_s: a,
                    end_s: b,
                    label: l,
                    clip_id: (!l.is_rest()).then(|| format!("clip{k}")),
                })
                .collect(),
        };
        label_stream(&grid, &schedule, trim).unwrap()
    }

    #[test]
    fn rest_run_count() {
        let set = labeled(vec![(0.0, 7680.0, EmotionLabel::Rest)], 0.0);
        assert_eq!(cut_windows(&set, &WindowConfig::default()).len(), 240);
    }

    #[test]
    fn partial_tail_dropped() {
        let set = labeled(vec![(0.0, 3906.0, EmotionLabel::SadAnger)], 0.0);
        let windows = cut_windows(&set, &WindowConfig::default());
        assert_eq!(windows.len(), 122);
        assert_eq!(windows[1].start_s, 32.0);
        assert_eq!(windows[0].channels[&ChannelId::HR], (0..32).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn short_run_gives_nothing() {
        let set = labeled(vec![(0.0, 31.0, EmotionLabel::Fear)], 0.0);
        assert!(cut_windows(&set, &WindowConfig::default()).is_empty());
    }

    #[test]
    fn windows_start_after_trim_and_inherit_clip() {
        let set = labeled(vec![(0.0, 100.0, EmotionLabel::Rest), (100.0, 200.0, EmotionLabel::Fear)], 15.0);
        let windows = cut_windows(&set, &WindowConfig::new(32).unwrap());
        let fear: Vec<_> = windows.iter().filter(|w| w.label == EmotionLabel::Fear).collect();
        assert_eq!(fear.len(), 2); // 85 usable seconds
        assert_eq!(fear[0].start_s, 115.0);
        assert_eq!(fear[0].clip_id.as_deref(), Some("clip1"));
    }

    #[test]
    fn adjacent_clips_split_runs() {
        let set = labeled(vec![(0.0, 40.0, EmotionLabel::Fear), (40.0, 80.0, EmotionLabel::Fear)], 0.0);
        assert_eq!(cut_windows(&set, &WindowConfig::default()).len(), 2);
    }

    #[test]
    fn tiny_window_rejected() {
        assert!(WindowConfig::new(1).is_err());
    }
}
