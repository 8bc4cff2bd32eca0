use super::{Result, SignalError, TimeSeries};

/// Causal sliding median of `order` samples ending at each sample.
///
/// The window shrinks to the available samples near the start. Even-sized
/// windows take the mean of the two middle values.
pub fn median_filter(series: &TimeSeries, order: usize) -> Result<TimeSeries> {
    if order == 0 {
        return Err(SignalError::Config("median filter order must be >= 1".into()));
    }
    Ok(series.with_values(sliding_median(series.values(), order)))
}

/// Keeps a sorted copy of the current window and updates it incrementally.
pub(crate) fn sliding_median(values: &[f64], order: usize) -> Vec<f64> {
    let mut window: Vec<f64> = Vec::with_capacity(order + 1);
    let mut out = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if i >= order {
            let leaving = values[i - order];
            let pos = window.partition_point(|&x| x < leaving);
            window.remove(pos);
        }
        let pos = window.partition_point(|&x| x < v);
        window.insert(pos, v);

        let n = window.len();
        let median = if n % 2 == 1 {
            window[n / 2]
        } else {
            (window[n / 2 - 1] + window[n / 2]) / 2.0
        };
        out.push(median);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ChannelId;

    fn series(values: &[f64]) -> TimeSeries {
        let t = (0..values.len() as i64).map(|i| i * 1000).collect();
        TimeSeries::new(ChannelId::GSR, "wrist", t, values.to_vec()).unwrap()
    }

    #[test]
    fn constant_unchanged() {
        let s = series(&[4.0; 20]);
        for order in 1..12 {
            assert_eq!(median_filter(&s, order).unwrap().values(), s.values());
        }
    }

    #[test]
    fn spike_removed() {
        let mut v = vec![0.0; 12];
        v[5] = 100.0;
        let out = median_filter(&series(&v), 10).unwrap();
        assert_eq!(out.values()[5], 0.0);
        assert!(out.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn even_window_takes_mean() {
        let out = median_filter(&series(&[1.0, 3.0]), 2).unwrap();
        assert_eq!(out.values(), &[1.0, 2.0]);
    }

    #[test]
    fn order_zero_rejected() {
        assert!(matches!(median_filter(&series(&[1.0]), 0), Err(SignalError::Config(_))));
    }

    #[test]
    fn repeated_values_removed_correctly() {
        let v = [2.0, 2.0, 1.0, 2.0, 5.0, 5.0, 1.0];
        let out = sliding_median(&v, 3);
        assert_eq!(out, vec![2.0, 2.0, 2.0, 2.0, 2.0, 5.0, 5.0]);
    }
}
