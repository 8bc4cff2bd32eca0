use serde::{Deserialize, Serialize};

use super::TimeSeries;

/// Below this sample standard deviation a session is treated as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub series: TimeSeries,
    /// Input was (numerically) constant; output is all zeros.
    pub degenerate: bool,
}

/// Z-scores one channel over one session (mean 0, sample std 1).
pub fn normalize_session(series: &TimeSeries) -> Normalized {
    let v = series.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    if !(std >= DEGENERATE_STD) {
        return Normalized { series: series.with_values(vec![0.0; v.len()]), degenerate: true };
    }
    Normalized {
        series: series.with_values(v.iter().map(|x| (x - mean) / std).collect()),
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ChannelId;

    fn series(values: &[f64]) -> TimeSeries {
        let t = (0..values.len() as i64).map(|i| i * 1000).collect();
        TimeSeries::new(ChannelId::HR, "chest", t, values.to_vec()).unwrap()
    }

    fn mean_std(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    }

    #[test]
    fn z_score() {
        let out = normalize_session(&series(&[2.0, 4.0, 6.0]));
        assert!(!out.degenerate);
        assert_eq!(out.series.values(), &[-1.0, 0.0, 1.0]);
        let (m, s) = mean_std(out.series.values());
        assert!(m.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_is_degenerate() {
        let out = normalize_session(&series(&[5.0, 5.0, 5.0]));
        assert!(out.degenerate);
        assert_eq!(out.series.values(), &[0.0, 0.0, 0.0]);
        assert!(normalize_session(&series(&[1.0])).degenerate);
    }

    #[test]
    fn idempotent() {
        let v: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin() * 40.0 + 70.0).collect();
        let once = normalize_session(&series(&v)).series;
        let twice = normalize_session(&once).series;
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
