//! Adaptive stimulus selection for the personalized baseline experiment:
//! the clip pool, ranking feedback, protocol-constrained session plans and
//! convergence detection.

mod convergence;
mod generate;
mod profile;
pub mod simulate;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{EmotionLabel, Valence};

pub use convergence::{check_convergence, good_minutes, ConvergenceConfig, ConvergenceStatus};
pub use generate::{generate_session, SessionConstraints, PERSONALIZED_ORDER};
pub use profile::{ingest_ranking, seed_profile, Exclusion, ProfileConfig, Questionnaire, SubjectProfile};
pub use simulate::{random_pool, run_adaptive_loop, trend, SimulatedSubject};
pub use validate::{validate_plan, PlanContext};

pub const PLAN_SCHEMA_VERSION: u32 = 1;

/// Standard clips run 3-12 minutes.
pub const STANDARD_CLIP_S: (f64, f64) = (180.0, 720.0);
/// Compilations run 10-40 minutes and target positive emotions only.
pub const COMPILATION_CLIP_S: (f64, f64) = (600.0, 2400.0);

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("questionnaire error: {0}")]
    Questionnaire(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("no eligible clips left for {0}")]
    PoolExhausted(EmotionLabel),
    #[error("cannot fit a session: {0}")]
    Infeasible(String),
    #[error("plan violates protocol: {}", .0.join("; "))]
    InvalidPlan(Vec<String>),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecencyClass {
    Contemporary,
    Classic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusClip {
    pub clip_id: String,
    pub title: String,
    /// Opaque locator; never fetched.
    pub source_url: String,
    pub target_emotion: EmotionLabel,
    pub tags: BTreeSet<String>,
    pub duration_s: f64,
    pub is_compilation: bool,
    pub is_personal: bool,
    pub recency_class: RecencyClass,
}

impl StimulusClip {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ProtocolError::Validation(format!("clip `{}`: {m}", self.clip_id)));
        if self.clip_id.is_empty() {
            return Err(ProtocolError::Validation("clip with empty id".into()));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return bad(format!("duration {} must be > 0", self.duration_s));
        }
        if self.target_emotion.is_rest() {
            return bad("rest is not a stimulus target".into());
        }
        if self.is_compilation && self.target_emotion.valence() != Some(Valence::Positive) {
            return bad("compilations may only target positive emotions".into());
        }
        Ok(())
    }

    /// Whether the clip's length fits its kind.
    pub fn length_ok(&self) -> bool {
        let (lo, hi) = if self.is_compilation { COMPILATION_CLIP_S } else { STANDARD_CLIP_S };
        (lo..=hi).contains(&self.duration_s)
    }
}

/// Checks every clip and that ids are unique.
pub fn validate_pool(pool: &[StimulusClip]) -> Result<()> {
    let mut ids = BTreeSet::new();
    for c in pool {
        c.validate()?;
        if !ids.insert(c.clip_id.as_str()) {
            return Err(ProtocolError::Validation(format!("duplicate clip id `{}`", c.clip_id)));
        }
    }
    Ok(())
}

pub(crate) fn find_clip<'a>(pool: &'a [StimulusClip], id: &str) -> Option<&'a StimulusClip> {
    pool.iter().find(|c| c.clip_id == id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub clip_id: String,
    pub session_id: String,
    /// 1-10.
    pub score: u8,
    /// Set when the clip evoked something other than its target.
    #[serde(default)]
    pub evoked_emotion: Option<EmotionLabel>,
    #[serde(default)]
    pub effective_span: Option<(f64, f64)>,
    #[serde(default)]
    pub notes: String,
}

impl Ranking {
    pub fn new(clip_id: impl Into<String>, session_id: impl Into<String>, score: u8) -> Self {
        Self {
            clip_id: clip_id.into(),
            session_id: session_id.into(),
            score,
            evoked_emotion: None,
            effective_span: None,
            notes: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.score) {
            return Err(ProtocolError::Validation(format!("score {} outside 1-10", self.score)));
        }
        if let Some((a, b)) = self.effective_span {
            if !(a >= 0.0 && b > a) {
                return Err(ProtocolError::Validation(format!("effective span ({a}, {b}) is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanItem {
    Rest { duration_s: f64 },
    Clip { clip_id: String, target_emotion: EmotionLabel, duration_s: f64 },
}

impl PlanItem {
    pub fn duration_s(&self) -> f64 {
        match self {
            PlanItem::Rest { duration_s } | PlanItem::Clip { duration_s, .. } => *duration_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub schema_version: u32,
    pub session_id: String,
    pub items: Vec<PlanItem>,
    pub planned_total_s: f64,
    /// Emotion groups in playback order.
    pub emotions_covered: Vec<EmotionLabel>,
    pub personalized: bool,
}

impl SessionPlan {
    pub fn clip_ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().filter_map(|i| match i {
            PlanItem::Clip { clip_id, .. } => Some(clip_id.as_str()),
            PlanItem::Rest { .. } => None,
        })
    }

    /// More negative than positive emotion groups.
    pub fn predominantly_negative(&self) -> bool {
        let neg = self.emotions_covered.iter().filter(|e| e.valence() == Some(Valence::Negative)).count();
        neg * 2 > self.emotions_covered.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn clip(id: &str, e: EmotionLabel, tags: &[&str], dur: f64) -> StimulusClip {
        StimulusClip {
            clip_id: id.into(),
            title: id.into(),
            source_url: format!("https://example.org/{id}"),
            target_emotion: e,
            tags: tags.iter().map(|t| t.to_string()).collect(),
            duration_s: dur,
            is_compilation: false,
            is_personal: false,
            recency_class: RecencyClass::Contemporary,
        }
    }

    #[test]
    fn clip_invariants() {
        assert!(clip("a", EmotionLabel::Fear, &[], 300.0).validate().is_ok());
        assert!(clip("a", EmotionLabel::Rest, &[], 300.0).validate().is_err());
        assert!(clip("a", EmotionLabel::Fear, &[], 0.0).validate().is_err());
        let mut c = clip("a", EmotionLabel::Fear, &[], 1200.0);
        c.is_compilation = true;
        assert!(c.validate().is_err());
        c.target_emotion = EmotionLabel::JoyAmus;
        assert!(c.validate().is_ok() && c.length_ok());
        let pool = vec![clip("a", EmotionLabel::Fear, &[], 300.0), clip("a", EmotionLabel::Fear, &[], 300.0)];
        assert!(validate_pool(&pool).is_err());
    }

    #[test]
    fn ranking_bounds() {
        assert!(Ranking::new("a", "s", 10).validate().is_ok());
        assert!(matches!(Ranking::new("a", "s", 11).validate(), Err(ProtocolError::Validation(_))));
        assert!(Ranking::new("a", "s", 0).validate().is_err());
    }
}
