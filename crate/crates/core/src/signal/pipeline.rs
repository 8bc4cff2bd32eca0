//! End-to-end preprocessing of one recorded session.

use serde::{Deserialize, Serialize};

use super::io::SessionManifest;
use super::{
    align_and_resample, label_stream, median_filter, normalize_session, ChannelId,
    LabeledSignalSet, Result, TimeSeries, DEFAULT_TARGET_RATE, DEFAULT_TRIM_S, GSR_MEDIAN_ORDER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub target_rate: f64,
    pub trim_s: f64,
    pub gsr_median_order: usize,
    pub normalize: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            target_rate: DEFAULT_TARGET_RATE,
            trim_s: DEFAULT_TRIM_S as f64,
            gsr_median_order: GSR_MEDIAN_ORDER,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedSession {
    pub signals: LabeledSignalSet,
    /// Channels whose session variance was too small to normalize.
    pub degenerate_channels: Vec<ChannelId>,
}

/// align -> GSR median filter -> per-session z-score -> label.
pub fn ingest_session(
    manifest: &SessionManifest,
    streams: &[TimeSeries],
    cfg: &IngestConfig,
) -> Result<IngestedSession> {
    let schedule = manifest.schedule()?;
    let mut grid = align_and_resample(streams, cfg.target_rate)?;
    for s in grid.iter_mut().filter(|s| s.channel == ChannelId::GSR) {
        *s = median_filter(s, cfg.gsr_median_order)?;
    }
    let mut degenerate_channels = Vec::new();
    if cfg.normalize {
        for s in grid.iter_mut() {
            let n = normalize_session(s);
            if n.degenerate {
                degenerate_channels.push(s.channel);
            }
            *s = n.series;
        }
    }
    let signals = label_stream(&grid, &schedule, cfg.trim_s)?;
    Ok(IngestedSession { signals, degenerate_channels })
}
