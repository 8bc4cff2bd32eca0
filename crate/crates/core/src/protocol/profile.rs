use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{find_clip, ProtocolError, Ranking, Result, SessionPlan, StimulusClip};
use crate::signal::EmotionLabel;

/// Answers on a -2..=2 scale; 0 is neutral.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    /// General susceptibility per emotion. Mandatory for every emotion the
    /// pool targets.
    pub sensitivity: BTreeMap<EmotionLabel, i8>,
    /// Optional per-tag adjustments, e.g. `horror -> Fear: -2` for "horror
    /// movies do not scare me".
    #[serde(default)]
    pub tag_affinity: BTreeMap<String, BTreeMap<EmotionLabel, i8>>,
}

impl Questionnaire {
    /// Neutral answers for every emotion.
    pub fn neutral() -> Self {
        Self { sensitivity: EmotionLabel::EMOTIONS.iter().map(|&e| (e, 0)).collect(), tag_affinity: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Weight of a new score in the effectiveness moving average.
    pub ema_weight: f64,
    /// Mismatched-emotion reports that exclude a (tag, emotion) pair.
    pub strike_limit: u32,
    /// Prior shift per questionnaire step.
    pub prior_step: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { ema_weight: 0.5, strike_limit: 2, prior_step: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Exclusion {
    pub tag: String,
    pub emotion: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub questionnaire: Questionnaire,
    pub config: ProfileConfig,
    /// Current estimate per emotion and tag; absent entries fall back to the prior.
    pub effectiveness: BTreeMap<EmotionLabel, BTreeMap<String, f64>>,
    pub strikes: BTreeMap<EmotionLabel, BTreeMap<String, u32>>,
    /// Never shrinks.
    pub excluded: BTreeSet<Exclusion>,
    /// Every ranking received, one per (clip, session), in arrival order.
    pub rankings: Vec<Ranking>,
    /// Plans issued to the subject, oldest first.
    pub sessions: Vec<SessionPlan>,
}

impl SubjectProfile {
    pub fn prior(&self, tag: &str, emotion: EmotionLabel) -> f64 {
        let q = &self.questionnaire;
        let s = q.sensitivity.get(&emotion).copied().unwrap_or(0) as f64;
        let a = q.tag_affinity.get(tag).and_then(|m| m.get(&emotion)).copied().unwrap_or(0) as f64;
        (0.5 + self.config.prior_step * (s + a)).clamp(0.05, 0.95)
    }

    pub fn tag_effectiveness(&self, tag: &str, emotion: EmotionLabel) -> f64 {
        self.effectiveness
            .get(&emotion)
            .and_then(|m| m.get(tag))
            .copied()
            .unwrap_or_else(|| self.prior(tag, emotion))
    }

    /// Mean tag effectiveness toward the clip's target; untagged clips use
    /// the emotion-level prior.
    pub fn clip_score(&self, clip: &StimulusClip) -> f64 {
        if clip.tags.is_empty() {
            return self.prior("", clip.target_emotion);
        }
        clip.tags.iter().map(|t| self.tag_effectiveness(t, clip.target_emotion)).sum::<f64>() / clip.tags.len() as f64
    }

    pub fn is_excluded(&self, tag: &str, emotion: EmotionLabel) -> bool {
        self.excluded.contains(&Exclusion { tag: tag.to_string(), emotion })
    }

    /// Whether any of the clip's tags is excluded for its target.
    pub fn clip_excluded(&self, clip: &StimulusClip) -> bool {
        clip.tags.iter().any(|t| self.is_excluded(t, clip.target_emotion))
    }

    pub fn shown_clips(&self) -> BTreeSet<&str> {
        self.sessions.iter().flat_map(|s| s.clip_ids()).collect()
    }

    /// Sessions with at least one ranking.
    pub fn completed_sessions(&self) -> usize {
        self.sessions.iter().filter(|s| self.rankings.iter().any(|r| r.session_id == s.session_id)).count()
    }

    /// Manual reset of an exclusion and its strikes.
    pub fn reset_exclusion(&mut self, tag: &str, emotion: EmotionLabel) {
        self.excluded.remove(&Exclusion { tag: tag.to_string(), emotion });
        if let Some(m) = self.strikes.get_mut(&emotion) {
            m.remove(tag);
        }
    }

    fn apply(&mut self, clip: &StimulusClip, r: &Ranking) {
        let e = clip.target_emotion;
        let w = self.config.ema_weight;
        let target = r.score as f64 / 10.0;
        for tag in &clip.tags {
            let old = self.tag_effectiveness(tag, e);
            self.effectiveness.entry(e).or_default().insert(tag.clone(), (1.0 - w) * old + w * target);
        }
        if r.evoked_emotion.is_some_and(|ev| ev != e) {
            for tag in &clip.tags {
                let s = self.strikes.entry(e).or_default().entry(tag.clone()).or_insert(0);
                *s += 1;
                if *s >= self.config.strike_limit {
                    self.excluded.insert(Exclusion { tag: tag.clone(), emotion: e });
                }
            }
        }
    }
}

/// Builds a profile from questionnaire answers. Every emotion targeted by a
/// pool clip needs a sensitivity answer; answers are clamped to -2..=2.
pub fn seed_profile(
    subject_id: impl Into<String>,
    questionnaire: Questionnaire,
    pool: &[StimulusClip],
) -> Result<SubjectProfile> {
    if questionnaire.sensitivity.is_empty() {
        return Err(ProtocolError::Questionnaire("questionnaire has no answers".into()));
    }
    let needed: BTreeSet<EmotionLabel> = pool.iter().map(|c| c.target_emotion).collect();
    let missing: Vec<String> =
        needed.iter().filter(|e| !questionnaire.sensitivity.contains_key(e)).map(|e| e.to_string()).collect();
    if !missing.is_empty() {
        return Err(ProtocolError::Questionnaire(format!("no sensitivity answer for {}", missing.join(", "))));
    }
    if questionnaire.sensitivity.contains_key(&EmotionLabel::Rest) {
        return Err(ProtocolError::Questionnaire("rest is not an emotion category".into()));
    }
    let out_of_range = questionnaire
        .sensitivity
        .values()
        .chain(questionnaire.tag_affinity.values().flat_map(|m| m.values()))
        .any(|v| !(-2..=2).contains(v));
    if out_of_range {
        return Err(ProtocolError::Questionnaire("answers must lie in -2..=2".into()));
    }
    Ok(SubjectProfile {
        subject_id: subject_id.into(),
        questionnaire,
        config: ProfileConfig::default(),
        effectiveness: BTreeMap::new(),
        strikes: BTreeMap::new(),
        excluded: BTreeSet::new(),
        rankings: Vec::new(),
        sessions: Vec::new(),
    })
}

/// Records a ranking and recomputes estimates by replaying history, so a
/// repeated (clip, session) submission replaces the earlier one. Exclusions
/// already in force are kept.
pub fn ingest_ranking(profile: &SubjectProfile, pool: &[StimulusClip], ranking: Ranking) -> Result<SubjectProfile> {
    ranking.validate()?;
    if find_clip(pool, &ranking.clip_id).is_none() {
        return Err(ProtocolError::Validation(format!("unknown clip `{}`", ranking.clip_id)));
    }
    let Some(plan) = profile.sessions.iter().find(|s| s.session_id == ranking.session_id) else {
        return Err(ProtocolError::Validation(format!(
            "session `{}` does not belong to subject `{}`",
            ranking.session_id, profile.subject_id
        )));
    };
    if !plan.clip_ids().any(|c| c == ranking.clip_id) {
        return Err(ProtocolError::Validation(format!(
            "clip `{}` was not part of session `{}`",
            ranking.clip_id, ranking.session_id
        )));
    }

    let mut history = profile.rankings.clone();
    match history.iter_mut().find(|r| r.clip_id == ranking.clip_id && r.session_id == ranking.session_id) {
        Some(slot) => *slot = ranking,
        None => history.push(ranking),
    }

    let mut next = SubjectProfile {
        effectiveness: BTreeMap::new(),
        strikes: BTreeMap::new(),
        rankings: Vec::new(),
        ..profile.clone()
    };
    for r in &history {
        let clip = find_clip(pool, &r.clip_id)
            .ok_or_else(|| ProtocolError::Validation(format!("unknown clip `{}` in history", r.clip_id)))?;
        next.apply(clip, r);
    }
    next.rankings = history;
    Ok(next)
}
