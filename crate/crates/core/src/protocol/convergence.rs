use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{find_clip, StimulusClip, SubjectProfile};
use crate::signal::EmotionLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub target_min: f64,
    pub min_rank: u8,
    pub max_sessions: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { target_min: 50.0, min_rank: 7, max_sessions: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "emotions", rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Converged,
    NeedMore(Vec<EmotionLabel>),
    MaxIterations,
}

/// Minutes of well-ranked material per emotion. A ranking counts when its
/// score reaches `min_rank` and it did not report a different evoked
/// emotion; the effective span replaces the clip length when given.
pub fn good_minutes(profile: &SubjectProfile, pool: &[StimulusClip], min_rank: u8) -> BTreeMap<EmotionLabel, f64> {
    let mut latest: BTreeMap<&str, &super::Ranking> = BTreeMap::new();
    for r in &profile.rankings {
        latest.insert(r.clip_id.as_str(), r);
    }
    let mut minutes: BTreeMap<EmotionLabel, f64> = EmotionLabel::EMOTIONS.iter().map(|&e| (e, 0.0)).collect();
    for (id, r) in latest {
        let Some(clip) = find_clip(pool, id) else { continue };
        if r.score < min_rank || r.evoked_emotion.is_some_and(|e| e != clip.target_emotion) {
            continue;
        }
        let seconds = r.effective_span.map_or(clip.duration_s, |(a, b)| b - a);
        *minutes.entry(clip.target_emotion).or_default() += seconds / 60.0;
    }
    minutes
}

pub fn check_convergence(profile: &SubjectProfile, pool: &[StimulusClip], cfg: &ConvergenceConfig) -> ConvergenceStatus {
    let minutes = good_minutes(profile, pool, cfg.min_rank);
    let short: Vec<EmotionLabel> =
        EmotionLabel::EMOTIONS.iter().copied().filter(|e| minutes[e] < cfg.target_min).collect();
    if short.is_empty() {
        ConvergenceStatus::Converged
    } else if profile.completed_sessions() >= cfg.max_sessions {
        ConvergenceStatus::MaxIterations
    } else {
        ConvergenceStatus::NeedMore(short)
    }
}
