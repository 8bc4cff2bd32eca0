use std::collections::BTreeSet;

use super::{
    Exclusion, PlanItem, ProtocolError, Result, SessionConstraints, SessionPlan, StimulusClip, SubjectProfile,
    COMPILATION_CLIP_S, PERSONALIZED_ORDER, PLAN_SCHEMA_VERSION, STANDARD_CLIP_S,
};
use crate::signal::{EmotionLabel, Valence};

/// What a plan is checked against.
#[derive(Debug, Clone)]
pub struct PlanContext<'a> {
    pub pool: &'a [StimulusClip],
    pub excluded: BTreeSet<Exclusion>,
    /// Clips shown in earlier sessions.
    pub shown: BTreeSet<String>,
    pub previous: Option<&'a SessionPlan>,
    pub constraints: &'a SessionConstraints,
}

impl<'a> PlanContext<'a> {
    /// Context for the subject's next plan (not yet recorded in `profile`).
    pub fn for_profile(profile: &'a SubjectProfile, pool: &'a [StimulusClip], constraints: &'a SessionConstraints) -> Self {
        Self {
            pool,
            excluded: profile.excluded.clone(),
            shown: profile.sessions.iter().flat_map(|s| s.clip_ids().map(str::to_string)).collect(),
            previous: profile.sessions.last(),
            constraints,
        }
    }
}

fn valence(e: EmotionLabel) -> Option<Valence> {
    match e.code() {
        1 | 2 | 4 => Some(Valence::Negative),
        3 | 5 | 6 => Some(Valence::Positive),
        _ => None,
    }
}

/// Checks every structural rule of the protocol; all violations are
/// reported together.
pub fn validate_plan(plan: &SessionPlan, ctx: &PlanContext) -> Result<()> {
    let cons = ctx.constraints;
    let mut v: Vec<String> = Vec::new();

    if plan.schema_version != PLAN_SCHEMA_VERSION {
        v.push(format!("schema version {} (expected {PLAN_SCHEMA_VERSION})", plan.schema_version));
    }
    if !matches!(plan.items.first(), Some(PlanItem::Rest { .. })) {
        v.push("plan does not start with a rest".into());
    }

    // emotion groups: maximal runs of clips between rests
    let mut groups: Vec<(EmotionLabel, usize)> = Vec::new();
    let mut in_group = false;
    let mut seen_clips = BTreeSet::new();
    for item in &plan.items {
        match item {
            PlanItem::Rest { duration_s } => {
                in_group = false;
                if (duration_s - cons.rest_s).abs() > 1e-9 {
                    v.push(format!("rest of {duration_s}s, expected {}s", cons.rest_s));
                }
            }
            PlanItem::Clip { clip_id, target_emotion, duration_s } => {
                match groups.last_mut() {
                    Some((e, n)) if in_group && e == target_emotion => *n += 1,
                    Some((e, _)) if in_group => {
                        v.push(format!("{e} followed by {target_emotion} without a rest"));
                        groups.push((*target_emotion, 1));
                    }
                    _ => groups.push((*target_emotion, 1)),
                }
                in_group = true;

                if !seen_clips.insert(clip_id.as_str()) {
                    v.push(format!("clip `{clip_id}` repeated within the session"));
                }
                if ctx.shown.contains(clip_id) {
                    v.push(format!("clip `{clip_id}` was shown in an earlier session"));
                }
                let Some(clip) = ctx.pool.iter().find(|c| &c.clip_id == clip_id) else {
                    v.push(format!("clip `{clip_id}` is not in the pool"));
                    continue;
                };
                if clip.target_emotion != *target_emotion {
                    v.push(format!("clip `{clip_id}` targets {}, planned as {target_emotion}", clip.target_emotion));
                }
                if (clip.duration_s - duration_s).abs() > 1e-9 {
                    v.push(format!("clip `{clip_id}` lasts {}s, planned as {duration_s}s", clip.duration_s));
                }
                let (lo, hi) = if clip.is_compilation { COMPILATION_CLIP_S } else { STANDARD_CLIP_S };
                if clip.duration_s < lo || clip.duration_s > hi {
                    v.push(format!("clip `{clip_id}` length {}s outside {lo}-{hi}s", clip.duration_s));
                }
                if clip.is_compilation && valence(*target_emotion) != Some(Valence::Positive) {
                    v.push(format!("compilation `{clip_id}` used for {target_emotion}"));
                }
                for tag in &clip.tags {
                    if ctx.excluded.contains(&Exclusion { tag: tag.clone(), emotion: *target_emotion }) {
                        v.push(format!("clip `{clip_id}` carries excluded tag `{tag}` for {target_emotion}"));
                    }
                }
            }
        }
    }
    if matches!(plan.items.last(), Some(PlanItem::Rest { .. })) {
        v.push("plan ends with a rest".into());
    }

    let order: Vec<EmotionLabel> = groups.iter().map(|g| g.0).collect();
    let distinct: BTreeSet<EmotionLabel> = order.iter().copied().collect();
    if distinct.len() != order.len() {
        v.push("an emotion appears in more than one group".into());
    }
    if plan.emotions_covered != order {
        v.push(format!("emotions_covered {:?} does not match playback order {order:?}", plan.emotions_covered));
    }

    let total: f64 = plan.items.iter().map(PlanItem::duration_s).sum();
    if (total - plan.planned_total_s).abs() > 1e-6 {
        v.push(format!("planned total {}s but items sum to {total}s", plan.planned_total_s));
    }

    if plan.personalized {
        if order != PERSONALIZED_ORDER {
            v.push(format!("personalized order {order:?} differs from {PERSONALIZED_ORDER:?}"));
        }
    } else {
        if !(cons.min_emotions..=cons.max_emotions).contains(&distinct.len()) {
            v.push(format!("{} emotions, expected {}-{}", distinct.len(), cons.min_emotions, cons.max_emotions));
        }
        if total < cons.min_total_s - 1e-9 || total > cons.max_total_s + 1e-9 {
            v.push(format!("duration {:.1} min outside {}-{} min", total / 60.0, cons.min_total_s / 60.0, cons.max_total_s / 60.0));
        }
        let negatives = order.iter().filter(|&&e| valence(e) == Some(Valence::Negative)).count();
        if negatives > cons.max_negative {
            v.push(format!("{negatives} negative emotions, at most {}", cons.max_negative));
        }
        if let Some(prev) = ctx.previous {
            let prev_neg = prev.emotions_covered.iter().filter(|&&e| valence(e) == Some(Valence::Negative)).count();
            if prev_neg * 2 > prev.emotions_covered.len() && negatives * 2 > order.len() {
                v.push("two predominantly negative sessions in a row".into());
            }
        }
    }
    for w in order.windows(2) {
        if valence(w[0]) == Some(Valence::Positive) && valence(w[1]) == Some(Valence::Negative) {
            v.push(format!("{} is followed by {}", w[0], w[1]));
        }
    }
    if order.last().is_some_and(|&e| valence(e) != Some(Valence::Positive)) {
        v.push("session does not end on a positive emotion".into());
    }
    if order.is_empty() {
        v.push("plan has no clips".into());
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(ProtocolError::InvalidPlan(v))
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::clip;
    use super::*;

    fn fixture() -> (Vec<StimulusClip>, SessionPlan) {
        let pool = vec![
            clip("f1", EmotionLabel::Fear, &["dark"], 720.0),
            clip("f2", EmotionLabel::Fear, &[], 720.0),
            clip("f3", EmotionLabel::Fear, &[], 660.0),
            clip("j1", EmotionLabel::JoyAmus, &[], 720.0),
            clip("j2", EmotionLabel::JoyAmus, &[], 720.0),
        ];
        let c = |id: &str, e, d| PlanItem::Clip { clip_id: id.into(), target_emotion: e, duration_s: d };
        let items = vec![
            PlanItem::Rest { duration_s: 300.0 },
            c("f1", EmotionLabel::Fear, 720.0),
            c("f2", EmotionLabel::Fear, 720.0),
            c("f3", EmotionLabel::Fear, 660.0),
            PlanItem::Rest { duration_s: 300.0 },
            c("j1", EmotionLabel::JoyAmus, 720.0),
            c("j2", EmotionLabel::JoyAmus, 720.0),
        ];
        let plan = SessionPlan {
            schema_version: 1,
            session_id: "s".into(),
            planned_total_s: items.iter().map(PlanItem::duration_s).sum(),
            items,
            emotions_covered: vec![EmotionLabel::Fear, EmotionLabel::JoyAmus],
            personalized: false,
        };
        (pool, plan)
    }

    fn ctx<'a>(pool: &'a [StimulusClip], cons: &'a SessionConstraints) -> PlanContext<'a> {
        PlanContext { pool, excluded: BTreeSet::new(), shown: BTreeSet::new(), previous: None, constraints: cons }
    }

    #[test]
    fn accepts_valid_plan() {
        let (pool, plan) = fixture();
        let cons = SessionConstraints::default();
        assert_eq!(plan.planned_total_s, 4140.0);
        validate_plan(&plan, &ctx(&pool, &cons)).unwrap();
    }

    #[test]
    fn reports_violations() {
        let (pool, plan) = fixture();
        let cons = SessionConstraints::default();
        let mut c = ctx(&pool, &cons);
        c.excluded.insert(Exclusion { tag: "dark".into(), emotion: EmotionLabel::Fear });
        c.shown.insert("j2".into());
        let Err(ProtocolError::InvalidPlan(v)) = validate_plan(&plan, &c) else { panic!() };
        assert_eq!(v.len(), 2, "{v:?}");

        let mut reversed = plan.clone();
        reversed.items = vec![reversed.items[0].clone(), reversed.items[5].clone(), reversed.items[4].clone(), reversed.items[1].clone()];
        reversed.planned_total_s = 1620.0;
        reversed.emotions_covered = vec![EmotionLabel::JoyAmus, EmotionLabel::Fear];
        let Err(ProtocolError::InvalidPlan(v)) = validate_plan(&reversed, &ctx(&pool, &cons)) else { panic!() };
        assert!(v.iter().any(|m| m.contains("duration")));
        assert!(v.iter().any(|m| m.contains("is followed by")));
        assert!(v.iter().any(|m| m.contains("positive")));

        let mut glued = plan.clone();
        glued.items.remove(4);
        glued.planned_total_s -= 300.0;
        assert!(validate_plan(&glued, &ctx(&pool, &cons)).is_err());
    }
}
