use super::{FeatureError, FeatureId, Result, Window, N_FEATURES};
use crate::signal::ChannelId;

/// Streaming mean / sample-variance / sum of squares (Welford).
#[derive(Default, Clone, Copy)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        self.sum_sq += x * x;
    }

    fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut m = Self::default();
        xs.into_iter().for_each(|x| m.push(x));
        m
    }

    /// Sample std; a single observation has zero spread.
    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0).sqrt()
        }
    }
}

/// Computes the 17 features of one window in [`FeatureId`] order.
pub fn extract_features(window: &Window) -> Result<[f64; N_FEATURES]> {
    let channel = |c: ChannelId| -> Result<&[f64]> {
        let v = window
            .channels
            .get(&c)
            .ok_or_else(|| FeatureError::Feature(format!("window at {}s lacks channel {c}", window.start_s)))?;
        if v.len() < 2 {
            return Err(FeatureError::Feature(format!("channel {c} has {} samples, need >= 2", v.len())));
        }
        Ok(v)
    };

    let hr = Moments::of(channel(ChannelId::HR)?.iter().copied());
    let hrv_raw = channel(ChannelId::HRV)?;
    let hrv = Moments::of(hrv_raw.iter().copied());
    let hrp = Moments::of(channel(ChannelId::HRP)?.iter().copied());
    let br = Moments::of(channel(ChannelId::BR)?.iter().copied());
    let gsr = Moments::of(channel(ChannelId::GSR)?.iter().copied());
    let skt = Moments::of(channel(ChannelId::SKT)?.iter().copied());

    let mut diff = Moments::default();
    let mut diff_sq = Moments::default();
    for pair in hrv_raw.windows(2) {
        let d = pair[1] - pair[0];
        diff.push(d);
        diff_sq.push(d * d);
    }

    let mut out = [0.0; N_FEATURES];
    for f in FeatureId::ALL {
        out[f.index()] = match f {
            FeatureId::HrvMean => hrv.mean,
            FeatureId::HrvStd => hrv.std(),
            FeatureId::BrMean => br.mean,
            FeatureId::BrStd => br.std(),
            FeatureId::HrpMean => hrp.mean,
            FeatureId::HrpStd => hrp.std(),
            FeatureId::BrSumSq => br.sum_sq,
            FeatureId::GsrSumSq => gsr.sum_sq,
            FeatureId::HrvMeanDiff => diff.mean,
            FeatureId::HrvStdDiff => diff.std(),
            FeatureId::GsrMean => gsr.mean,
            FeatureId::GsrStd => gsr.std(),
            FeatureId::SktMean => skt.mean,
            FeatureId::HrvMeanDiffSq => diff_sq.mean,
            FeatureId::HrvStdDiffSq => diff_sq.std(),
            FeatureId::HrMean => hr.mean,
            FeatureId::HrStd => hr.std(),
        };
    }
    if let Some(f) = FeatureId::ALL.iter().find(|f| !out[f.index()].is_finite()) {
        return Err(FeatureError::Feature(format!("{f} is not finite at {}s", window.start_s)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::EmotionLabel;
    use std::collections::BTreeMap;

    fn window(fill: impl Fn(ChannelId) -> Vec<f64>) -> Window {
        Window {
            session_id: "s".into(),
            label: EmotionLabel::Fear,
            clip_id: None,
            start_s: 0.0,
            channels: ChannelId::ALL.into_iter().map(|c| (c, fill(c))).collect::<BTreeMap<_, _>>(),
        }
    }

    #[test]
    fn constant_window() {
        let c = 1.5;
        let f = extract_features(&window(|_| vec![c; 32])).unwrap();
        for id in FeatureId::ALL {
            let expected = match id {
                FeatureId::BrSumSq | FeatureId::GsrSumSq => 32.0 * c * c,
                FeatureId::HrvMean
                | FeatureId::BrMean
                | FeatureId::HrpMean
                | FeatureId::GsrMean
                | FeatureId::SktMean
                | FeatureId::HrMean => c,
                _ => 0.0,
            };
            assert!((f[id.index()] - expected).abs() < 1e-12, "{id}");
        }
    }

    #[test]
    fn hrv_diff_by_hand() {
        let f = extract_features(&window(|c| {
            if c == ChannelId::HRV {
                vec![1.0, 2.0, 4.0]
            } else {
                vec![0.0; 3]
            }
        }))
        .unwrap();
        assert_eq!(f[FeatureId::HrvMeanDiff.index()], 1.5);
        assert_eq!(f[FeatureId::HrvMeanDiffSq.index()], 2.5);
        assert!((f[FeatureId::HrvStdDiff.index()] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((f[FeatureId::HrvStdDiffSq.index()] - 4.5f64.sqrt()).abs() < 1e-12);
        assert!((f[FeatureId::HrvMean.index()] - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn missing_channel_is_error() {
        let mut w = window(|_| vec![0.0; 4]);
        w.channels.remove(&ChannelId::GSR);
        assert!(matches!(extract_features(&w), Err(FeatureError::Feature(_))));
    }

    #[test]
    fn translation_covariance() {
        let base = |c: ChannelId| (0..32).map(|i| ((i * (c.index() + 3)) as f64 * 0.7).sin()).collect::<Vec<_>>();
        let f0 = extract_features(&window(base)).unwrap();
        let k = 3.25;
        let f1 = extract_features(&window(|c| {
            let mut v = base(c);
            if c == ChannelId::HRV {
                v.iter_mut().for_each(|x| *x += k);
            }
            v
        }))
        .unwrap();
        for id in FeatureId::ALL {
            let d = f1[id.index()] - f0[id.index()];
            if id == FeatureId::HrvMean {
                assert!((d - k).abs() < 1e-9);
            } else {
                assert!(d.abs() < 1e-9, "{id} moved by {d}");
            }
        }
    }
}
