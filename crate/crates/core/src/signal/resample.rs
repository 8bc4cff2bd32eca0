use super::{Result, SignalError, TimeSeries};

/// Resamples every stream onto one shared grid at `target_rate` Hz.
///
/// Grid points are the integer multiples of the sampling period (relative to
/// the global epoch) that cover the union of all input ranges. Interior
/// points are linearly interpolated; points before the first or after the
/// last observation hold the nearest observed value.
pub fn align_and_resample(streams: &[TimeSeries], target_rate: f64) -> Result<Vec<TimeSeries>> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(SignalError::Config(format!("target rate must be > 0, got {target_rate}")));
    }
    if streams.is_empty() {
        return Err(SignalError::Ingest("no streams to align".into()));
    }
    for s in streams {
        if s.is_empty() {
            return Err(SignalError::Ingest(format!("{}: empty stream", s.channel)));
        }
        if s.timestamps_ms().windows(2).any(|w| w[1] <= w[0]) {
            return Err(SignalError::Ingest(format!("{}: non-monotone timestamps", s.channel)));
        }
    }

    let start = streams.iter().map(TimeSeries::first_ms).min().unwrap();
    let end = streams.iter().map(TimeSeries::last_ms).max().unwrap();
    let period_ms = 1000.0 / target_rate;
    let k0 = (start as f64 / period_ms).floor() as i64;
    let k1 = (end as f64 / period_ms).ceil() as i64;
    let grid: Vec<f64> = (k0..=k1).map(|k| k as f64 * period_ms).collect();
    let grid_ms: Vec<i64> = grid.iter().map(|t| t.round() as i64).collect();

    streams
        .iter()
        .map(|s| {
            let values = grid.iter().map(|&t| sample_at(s, t)).collect();
            let mut out = TimeSeries::new(s.channel, s.device.clone(), grid_ms.clone(), values)?;
            out.sample_rate_hint = Some(target_rate);
            Ok(out)
        })
        .collect()
}

fn sample_at(series: &TimeSeries, t: f64) -> f64 {
    let ts = series.timestamps_ms();
    let vs = series.values();
    let idx = ts.partition_point(|&x| (x as f64) < t);
    if idx == ts.len() {
        return vs[ts.len() - 1];
    }
    if ts[idx] as f64 == t || idx == 0 {
        return vs[idx];
    }
    let (t0, t1) = (ts[idx - 1] as f64, ts[idx] as f64);
    let frac = (t - t0) / (t1 - t0);
    vs[idx - 1] + frac * (vs[idx] - vs[idx - 1])
}
