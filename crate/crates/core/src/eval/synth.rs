//! Synthetic subject generator.
//!
//! Each channel is `base + noise_std * (sep * eff * offset[label] + bias +
//! scale[label] * e_t)` where `e_t` is unit-variance AR(1) noise, `eff` the
//! effectiveness of the clip playing at `t` (1 during rest) and `bias` a
//! per-session offset. Two devices are emitted: a chest strap with HR, HRV,
//! HRP and BR at 1 Hz (timing jitter, dropped samples) and a wristband with
//! GSR and SKT at 2 Hz.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::features::ClipRanks;
use crate::rng::{derive_seed, seeded, Rng};
use crate::signal::io::{RecordedSession, SessionManifest};
use crate::signal::pipeline::{ingest_session, IngestConfig};
use crate::signal::{ChannelId, EmotionLabel, LabeledSignalSet, Segment, SessionSchedule, TimeSeries};

pub const CHEST: &str = "chest";
pub const WRIST: &str = "wrist";

/// Segment lengths in seconds of the single-subject experiment summary,
/// ordered by label code (Rest first).
pub const TABLE_ONE_SECONDS: [f64; 7] = [7680.0, 4128.0, 3906.0, 5058.0, 3488.0, 4768.0, 3840.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub base: f64,
    pub noise_std: f64,
    /// Mean shift per label code, in units of `noise_std`.
    pub offsets: [f64; 7],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SktMode {
    /// Label-conditioned like every other channel.
    Profile,
    /// Rises with elapsed session time and ignores the label.
    Leak,
    /// Pure noise.
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ScheduleShape {
    /// One session of consecutive single-clip segments.
    Runs { runs: Vec<(EmotionLabel, f64)> },
    /// Sessions of 2-3 emotion groups (negatives first) separated by rests,
    /// each filled with clips of random length.
    Protocol { sessions: usize, session_s: f64, rest_s: f64, clip_min_s: f64, clip_max_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub channels: BTreeMap<ChannelId, ChannelProfile>,
    /// Noise multiplier per label code.
    pub label_scale: [f64; 7],
    /// Multiplies every label offset; 0 makes classes indistinguishable.
    pub separability: f64,
    pub shape: ScheduleShape,
    pub skt_mode: SktMode,
    /// Total SKT rise over a session in leak mode, in units of `noise_std`.
    pub leak_strength: f64,
    pub ar_coef: f64,
    pub session_bias_std: f64,
    /// Clip effectiveness is drawn uniformly from this range.
    pub effectiveness: (f64, f64),
    pub jitter_ms: i64,
    pub dropout: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let profile = |base, noise_std, offsets| ChannelProfile { base, noise_std, offsets };
        let channels = BTreeMap::from([
            (ChannelId::HR, profile(70.0, 5.0, [0.0, 1.2, -0.6, 0.4, 0.8, 1.0, -0.9])),
            (ChannelId::HRV, profile(50.0, 10.0, [0.0, -1.0, 0.5, 0.9, -0.4, 0.2, 1.1])),
            (ChannelId::HRP, profile(0.85, 0.05, [0.0, 0.6, 1.0, -0.8, 0.3, -0.5, 0.1])),
            (ChannelId::BR, profile(15.0, 2.0, [0.0, 0.9, -0.3, -0.9, 1.1, 0.5, -0.4])),
            (ChannelId::GSR, profile(5.0, 0.5, [0.0, 1.3, 0.2, 0.7, 0.9, -0.2, -1.0])),
            (ChannelId::SKT, profile(33.0, 0.3, [0.0, -0.4, 0.3, 0.6, -0.7, 0.9, 0.2])),
        ]);
        Self {
            channels,
            label_scale: [1.0, 1.3, 0.8, 1.0, 1.2, 1.1, 0.7],
            separability: 1.0,
            shape: ScheduleShape::Protocol {
                sessions: 9,
                session_s: 3600.0,
                rest_s: 300.0,
                clip_min_s: 180.0,
                clip_max_s: 720.0,
            },
            skt_mode: SktMode::Profile,
            leak_strength: 4.0,
            ar_coef: 0.7,
            session_bias_std: 1.0,
            effectiveness: (0.3, 1.0),
            jitter_ms: 50,
            dropout: 0.01,
        }
    }
}

impl SynthSpec {
    /// One session whose segment lengths match the experiment summary.
    pub fn table_one() -> Self {
        Self::table_one_scaled(1.0)
    }

    /// Like [`SynthSpec::table_one`] with every length multiplied by `factor`.
    pub fn table_one_scaled(factor: f64) -> Self {
        let runs = EmotionLabel::ALL.iter().zip(TABLE_ONE_SECONDS).map(|(&l, s)| (l, (s * factor).round())).collect();
        Self { shape: ScheduleShape::Runs { runs }, ..Self::default() }
    }

    pub fn protocol(sessions: usize) -> Self {
        let mut s = Self::default();
        if let ScheduleShape::Protocol { sessions: n, .. } = &mut s.shape {
            *n = sessions;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EvalError::Config(m));
        for c in ChannelId::ALL {
            match self.channels.get(&c) {
                None => return bad(format!("no profile for channel {c}")),
                Some(p) if !(p.noise_std > 0.0) || !p.base.is_finite() || p.offsets.iter().any(|o| !o.is_finite()) => {
                    return bad(format!("profile for {c} needs finite values and noise_std > 0"))
                }
                _ => {}
            }
        }
        if self.label_scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("label scales must be finite and > 0".into());
        }
        if !(self.separability >= 0.0) || !self.separability.is_finite() || !self.leak_strength.is_finite() {
            return bad("separability must be finite and >= 0".into());
        }
        if !(0.0..1.0).contains(&self.ar_coef) {
            return bad(format!("ar_coef {} outside [0, 1)", self.ar_coef));
        }
        if !(self.session_bias_std >= 0.0) {
            return bad("session_bias_std must be >= 0".into());
        }
        let (lo, hi) = self.effectiveness;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad(format!("effectiveness range ({lo}, {hi}) must satisfy 0 <= lo <= hi <= 1"));
        }
        if !(0..250).contains(&self.jitter_ms) {
            return bad(format!("jitter {} ms must be in [0, 250)", self.jitter_ms));
        }
        if !(0.0..=0.5).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 0.5]", self.dropout));
        }
        match &self.shape {
            ScheduleShape::Runs { runs } => {
                if runs.is_empty() || runs.iter().any(|&(_, s)| !(s >= 1.0) || s.fract() != 0.0) {
                    return bad("runs must be non-empty whole numbers of seconds >= 1".into());
                }
            }
            &ScheduleShape::Protocol { sessions, session_s, rest_s, clip_min_s, clip_max_s } => {
                if sessions == 0 {
                    return bad("at least one session is required".into());
                }
                if !(clip_min_s >= 1.0 && clip_min_s <= clip_max_s) || !(rest_s >= 0.0) {
                    return bad("clip lengths need 1 <= min <= max and rest >= 0".into());
                }
                if session_s < 3.0 * rest_s + 3.0 * clip_min_s {
                    return bad(format!("session length {session_s}s cannot hold three groups and rests"));
                }
            }
        }
        Ok(())
    }
}

/// Raw recordings, manifests and clip rankings of a generated subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubject {
    pub seed: u64,
    pub sessions: Vec<RecordedSession>,
    pub rankings: ClipRanks,
    pub effectiveness: BTreeMap<String, f64>,
}

impl SyntheticSubject {
    pub fn ingest(&self) -> Result<Vec<LabeledSignalSet>> {
        self.ingest_with(&IngestConfig::default())
    }

    pub fn ingest_with(&self, cfg: &IngestConfig) -> Result<Vec<LabeledSignalSet>> {
        self.sessions
            .iter()
            .map(|s| Ok(ingest_session(&s.manifest, &s.streams()?, cfg)?.signals))
            .collect()
    }
}

/// Ranking on a 1-10 scale implied by an effectiveness in [0, 1].
pub fn rank_for(effectiveness: f64) -> u8 {
    (1.0 + 9.0 * effectiveness).round().clamp(1.0, 10.0) as u8
}

const NEGATIVE: [EmotionLabel; 3] = [EmotionLabel::Fear, EmotionLabel::SadAnger, EmotionLabel::Disgust];
const POSITIVE: [EmotionLabel; 3] = [EmotionLabel::AweRev, EmotionLabel::JoyAmus, EmotionLabel::Content];

struct Planned {
    schedule: SessionSchedule,
    effectiveness: BTreeMap<String, f64>,
    length_s: f64,
}

fn plan_sessions(spec: &SynthSpec, rng: &mut Rng) -> Vec<Planned> {
    let (lo, hi) = spec.effectiveness;
    let draw_eff = |rng: &mut Rng| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    match &spec.shape {
        ScheduleShape::Runs { runs } => {
            let mut t = 0.0;
            let mut effectiveness = BTreeMap::new();
            let segments = runs
                .iter()
                .enumerate()
                .map(|(i, &(label, len))| {
                    let clip_id = (!label.is_rest()).then(|| format!("run-{i:02}-{}", label.code()));
                    if let Some(c) = &clip_id {
                        effectiveness.insert(c.clone(), 1.0);
                    }
                    let seg = Segment { start_s: t, end_s: t + len, label, clip_id };
                    t += len;
                    seg
                })
                .collect();
            vec![Planned {
                schedule: SessionSchedule { session_id: "s01".into(), segments },
                effectiveness,
                length_s: t,
            }]
        }
        &ScheduleShape::Protocol { sessions, session_s, rest_s, clip_min_s, clip_max_s } => (0..sessions)
            .map(|s| {
                let mut groups = vec![NEGATIVE[s % 3], POSITIVE[s % 3]];
                if s % 2 == 0 {
                    groups.push(POSITIVE[(s + 1) % 3]);
                }
                let group_s = ((session_s - rest_s * groups.len() as f64) / groups.len() as f64).floor();
                let mut t = 0.0;
                let mut segments = Vec::new();
                let mut effectiveness = BTreeMap::new();
                for (g, &label) in groups.iter().enumerate() {
                    segments.push(Segment { start_s: t, end_s: t + rest_s, label: EmotionLabel::Rest, clip_id: None });
                    t += rest_s;
                    let end = t + group_s;
                    let mut c = 0;
                    while end - t >= 1.0 {
                        let mut len = rng.random_range(clip_min_s..=clip_max_s).round();
                        // a remainder shorter than a clip is absorbed into this one
                        if end - (t + len) < clip_min_s {
                            len = end - t;
                        }
                        let id = format!("s{:02}-g{g}-c{c}-{}", s + 1, label.code());
                        effectiveness.insert(id.clone(), draw_eff(rng));
                        segments.push(Segment { start_s: t, end_s: t + len, label, clip_id: Some(id) });
                        t += len;
                        c += 1;
                    }
                }
                Planned {
                    schedule: SessionSchedule { session_id: format!("s{:02}", s + 1), segments },
                    effectiveness,
                    length_s: t,
                }
            })
            .collect(),
    }
}

/// Device sample times in ms over `[0, length)`: the first and last samples
/// are exact, interior ones jittered, some dropped.
fn sample_times(length_s: f64, period_ms: i64, spec: &SynthSpec, rng: &mut Rng) -> Vec<i64> {
    let n = ((length_s * 1000.0) as i64 + period_ms - 1) / period_ms;
    let mut out = Vec::with_capacity(n as usize);
    for k in 0..n {
        let nominal = k * period_ms;
        if k == 0 || k == n - 1 {
            out.push(nominal);
            continue;
        }
        if rng.random::<f64>() < spec.dropout {
            continue;
        }
        let j = if spec.jitter_ms > 0 { rng.random_range(-spec.jitter_ms..=spec.jitter_ms) } else { 0 };
        out.push(nominal + j);
    }
    out
}

fn channel_series(
    channel: ChannelId,
    device: &str,
    times: &[i64],
    plan: &Planned,
    spec: &SynthSpec,
    rng: &mut Rng,
) -> Result<TimeSeries> {
    let p = &spec.channels[&channel];
    let bias: f64 = spec.session_bias_std * rng.sample::<f64, _>(StandardNormal);
    let innovation = (1.0 - spec.ar_coef * spec.ar_coef).sqrt();
    let mut e: f64 = rng.sample(StandardNormal);
    let mut seg = 0;
    let segs = &plan.schedule.segments;
    let values = times
        .iter()
        .map(|&ms| {
            let t = ms as f64 / 1000.0;
            while seg + 1 < segs.len() && t >= segs[seg].end_s {
                seg += 1;
            }
            let (label, eff) = match segs.get(seg) {
                Some(s) if s.start_s <= t && t < s.end_s => {
                    (s.label, s.clip_id.as_ref().map_or(1.0, |c| plan.effectiveness[c]))
                }
                _ => (EmotionLabel::Rest, 1.0),
            };
            let code = label.code() as usize;
            e = spec.ar_coef * e + innovation * rng.sample::<f64, _>(StandardNormal);
            let shift = match (channel, spec.skt_mode) {
                (ChannelId::SKT, SktMode::Leak) => spec.leak_strength * t / plan.length_s,
                (ChannelId::SKT, SktMode::Noise) => 0.0,
                _ => spec.separability * eff * p.offsets[code],
            };
            let scale = if channel == ChannelId::SKT && spec.skt_mode != SktMode::Profile {
                1.0
            } else {
                spec.label_scale[code]
            };
            p.base + p.noise_std * (shift + bias + scale * e)
        })
        .collect();
    Ok(TimeSeries::new(channel, device, times.to_vec(), values)?)
}

/// Generates a subject deterministically from `seed`.
pub fn generate_synthetic_subject(spec: &SynthSpec, seed: u64) -> Result<SyntheticSubject> {
    spec.validate()?;
    let plans = plan_sessions(spec, &mut seeded(derive_seed(seed, 0)));
    let mut sessions = Vec::with_capacity(plans.len());
    let mut effectiveness = BTreeMap::new();
    for (s, plan) in plans.iter().enumerate() {
        let stream = |k: u64| derive_seed(seed, 1 + 64 * s as u64 + k);
        let mut devices = BTreeMap::new();
        for (d, (device, period_ms, channels)) in [
            (CHEST, 1000, &[ChannelId::HR, ChannelId::HRV, ChannelId::HRP, ChannelId::BR][..]),
            (WRIST, 500, &[ChannelId::GSR, ChannelId::SKT][..]),
        ]
        .into_iter()
        .enumerate()
        {
            let times = sample_times(plan.length_s, period_ms, spec, &mut seeded(stream(d as u64)));
            let series = channels
                .iter()
                .map(|&c| channel_series(c, device, &times, plan, spec, &mut seeded(stream(8 + c.index() as u64))))
                .collect::<Result<Vec<_>>>()?;
            devices.insert(device.to_string(), series);
        }
        let manifest = SessionManifest::from_schedule(&plan.schedule, "session start");
        sessions.push(RecordedSession::from_streams(manifest, &devices)?);
        effectiveness.extend(plan.effectiveness.clone());
    }
    let rankings = effectiveness.iter().map(|(c, &e)| (c.clone(), rank_for(e))).collect();
    Ok(SyntheticSubject { seed, sessions, rankings, effectiveness })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_csv() {
        let spec = SynthSpec::table_one_scaled(0.02);
        let a = generate_synthetic_subject(&spec, 7).unwrap();
        let b = generate_synthetic_subject(&spec, 7).unwrap();
        let c = generate_synthetic_subject(&spec, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sessions[0].recordings, c.sessions[0].recordings);
    }

    #[test]
    fn protocol_sessions_are_valid() {
        let subject = generate_synthetic_subject(&SynthSpec::protocol(4), 1).unwrap();
        assert_eq!(subject.sessions.len(), 4);
        for s in &subject.sessions {
            let sched = s.manifest.schedule().unwrap();
            let end = sched.segments.last().unwrap().end_s;
            assert_eq!(end, 3600.0);
            let emotions: Vec<_> = sched.segments.iter().filter(|g| !g.label.is_rest()).map(|g| g.label).collect();
            let first_pos = emotions.iter().position(|l| l.valence() == Some(crate::signal::Valence::Positive));
            assert!(emotions[first_pos.unwrap()..].iter().all(|l| l.valence() == Some(crate::signal::Valence::Positive)));
        }
        let sessions = subject.ingest().unwrap();
        assert!(sessions.iter().all(|s| s.usable_count() > 2000));
        assert!(subject.rankings.len() > 8);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SynthSpec::default();
        spec.channels.remove(&ChannelId::GSR);
        assert!(matches!(generate_synthetic_subject(&spec, 0), Err(EvalError::Config(_))));
        let spec = SynthSpec { ar_coef: 1.0, ..SynthSpec::default() };
        assert!(spec.validate().is_err());
        let spec = SynthSpec { shape: ScheduleShape::Runs { runs: vec![] }, ..SynthSpec::default() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn ranks_follow_effectiveness() {
        assert_eq!(rank_for(0.0), 1);
        assert_eq!(rank_for(1.0), 10);
        assert_eq!(rank_for(0.67), 7);
    }
}
