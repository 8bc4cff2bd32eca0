use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{PlanItem, ProtocolError, Result, SessionPlan, StimulusClip, SubjectProfile, PLAN_SCHEMA_VERSION};
use crate::signal::{EmotionLabel, Valence};

/// Playback order of emotion groups: negatives first, ending on joy.
pub const PERSONALIZED_ORDER: [EmotionLabel; 6] = [
    EmotionLabel::SadAnger,
    EmotionLabel::Fear,
    EmotionLabel::Disgust,
    EmotionLabel::AweRev,
    EmotionLabel::Content,
    EmotionLabel::JoyAmus,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConstraints {
    pub rest_s: f64,
    pub min_total_s: f64,
    pub max_total_s: f64,
    pub min_emotions: usize,
    pub max_emotions: usize,
    pub max_negative: usize,
    pub min_clips: usize,
    pub max_clips: usize,
    /// All six emotions in [`PERSONALIZED_ORDER`], no duration bounds.
    pub personalized: bool,
}

impl Default for SessionConstraints {
    fn default() -> Self {
        Self {
            rest_s: 300.0,
            min_total_s: 3600.0,
            max_total_s: 4200.0,
            min_emotions: 2,
            max_emotions: 3,
            max_negative: 2,
            min_clips: 2,
            max_clips: 4,
            personalized: false,
        }
    }
}

impl SessionConstraints {
    pub fn personalized() -> Self {
        Self { rest_s: 180.0, personalized: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rest_s >= 0.0
            && self.min_total_s <= self.max_total_s
            && 1 <= self.min_emotions
            && self.min_emotions <= self.max_emotions
            && self.max_emotions <= 6
            && 1 <= self.min_clips
            && self.min_clips <= self.max_clips;
        if ok {
            Ok(())
        } else {
            Err(ProtocolError::Validation(format!("inconsistent session constraints: {self:?}")))
        }
    }
}

fn order_index(e: EmotionLabel) -> usize {
    PERSONALIZED_ORDER.iter().position(|&x| x == e).expect("emotion")
}

/// Clips for `emotion` the subject has not seen, not excluded, with valid
/// length, best first (ties by id).
fn candidates<'a>(
    profile: &SubjectProfile,
    pool: &'a [StimulusClip],
    shown: &BTreeSet<&str>,
    emotion: EmotionLabel,
) -> Vec<(&'a StimulusClip, f64)> {
    let mut c: Vec<(&StimulusClip, f64)> = pool
        .iter()
        .filter(|c| {
            c.target_emotion == emotion
                && !shown.contains(c.clip_id.as_str())
                && !profile.clip_excluded(c)
                && c.length_ok()
                && (!c.is_compilation || emotion.valence() == Some(Valence::Positive))
        })
        .map(|c| (c, profile.clip_score(c)))
        .collect();
    c.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.clip_id.cmp(&b.0.clip_id)));
    c
}

/// Picks the emotion set for the next standard session: least-covered
/// emotions first, at least one positive, at most `max_negative`
/// negatives, and never two predominantly negative sessions in a row.
fn choose_emotions(profile: &SubjectProfile, cons: &SessionConstraints) -> Result<Vec<EmotionLabel>> {
    let mut coverage = [0usize; 7];
    for s in &profile.sessions {
        for e in &s.emotions_covered {
            coverage[e.code() as usize] += 1;
        }
    }
    let min_cov = EmotionLabel::EMOTIONS.iter().map(|e| coverage[e.code() as usize]).min().unwrap_or(0);
    let prev_negative = profile.sessions.last().is_some_and(SessionPlan::predominantly_negative);

    let mut best: Option<(SetScore, Vec<EmotionLabel>)> = None;
    for mask in 1u32..64 {
        let set: Vec<EmotionLabel> =
            EmotionLabel::EMOTIONS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &e)| e).collect();
        if set.len() < cons.min_emotions || set.len() > cons.max_emotions {
            continue;
        }
        let neg = set.iter().filter(|e| e.valence() == Some(Valence::Negative)).count();
        let pos = set.len() - neg;
        if pos == 0 || neg > cons.max_negative || (prev_negative && neg * 2 > set.len()) {
            continue;
        }
        let stale = set.iter().filter(|e| coverage[e.code() as usize] > min_cov).count();
        let total: usize = set.iter().map(|e| coverage[e.code() as usize]).sum();
        let key = (stale, total, std::cmp::Reverse(set.len()), set.iter().map(|e| e.code()).collect());
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, set));
        }
    }
    let (_, mut set) = best.ok_or_else(|| ProtocolError::Infeasible("no admissible emotion set".into()))?;
    set.sort_by_key(|&e| order_index(e));
    Ok(set)
}

type Group<'a> = (EmotionLabel, Vec<(&'a StimulusClip, f64)>);

fn total(groups: &[Group], sel: &[Vec<usize>], rests: f64) -> f64 {
    rests + groups.iter().zip(sel).map(|((_, c), s)| s.iter().map(|&i| c[i].0.duration_s).sum::<f64>()).sum::<f64>()
}

/// Start from the best `max_clips` per emotion, drop the least effective
/// clip while too long, add the next best while too short.
fn greedy_fit(groups: &[Group], cons: &SessionConstraints, rests: f64) -> Option<Vec<Vec<usize>>> {
    let mut sel: Vec<Vec<usize>> = groups.iter().map(|(_, c)| (0..c.len().min(cons.max_clips)).collect()).collect();
    let mut t = total(groups, &sel, rests);
    while t > cons.max_total_s {
        let mut drops: Vec<(f64, usize, usize)> = sel
            .iter()
            .enumerate()
            .filter(|(_, s)| s.len() > cons.min_clips)
            .flat_map(|(g, s)| s.iter().enumerate().map(move |(k, &i)| (g, k, i)))
            .map(|(g, k, i)| (groups[g].1[i].1, g, k))
            .collect();
        drops.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2)));
        let (_, g, k) = *drops
            .iter()
            .find(|&&(_, g, k)| t - groups[g].1[sel[g][k]].0.duration_s >= cons.min_total_s)?;
        t -= groups[g].1[sel[g][k]].0.duration_s;
        sel[g].remove(k);
    }
    while t < cons.min_total_s {
        let mut adds: Vec<(f64, usize, usize)> = groups
            .iter()
            .enumerate()
            .flat_map(|(g, (_, c))| {
                let taken = &sel[g];
                c.iter().enumerate().filter(move |(i, _)| !taken.contains(i)).map(move |(i, (_, s))| (*s, g, i))
            })
            .filter(|&(_, g, i)| t + groups[g].1[i].0.duration_s <= cons.max_total_s)
            .collect();
        adds.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let &(_, g, i) = adds.first()?;
        t += groups[g].1[i].0.duration_s;
        sel[g].push(i);
        sel[g].sort_unstable();
    }
    Some(sel)
}

/// Exact search over subsets of each emotion's top candidates, maximizing
/// summed effectiveness within the duration window.
fn exhaustive_fit(groups: &[Group], cons: &SessionConstraints, rests: f64) -> Option<Vec<Vec<usize>>> {
    const TOP: usize = 8;
    let max_ms = ((cons.max_total_s - rests) * 1000.0).floor() as i64;
    let min_ms = ((cons.min_total_s - rests) * 1000.0).ceil() as i64;
    // duration in ms -> (score, chosen subsets so far)
    let mut states: HashMap<i64, (f64, Vec<Vec<usize>>)> = HashMap::from([(0, (0.0, Vec::new()))]);
    for (_, c) in groups {
        let k = c.len().min(TOP);
        let lo = cons.min_clips.min(k).max(1);
        let mut next: HashMap<i64, (f64, Vec<Vec<usize>>)> = HashMap::new();
        for mask in 1u32..(1 << k) {
            let n = mask.count_ones() as usize;
            if n < lo {
                continue;
            }
            let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let d: i64 = idx.iter().map(|&i| (c[i].0.duration_s * 1000.0).round() as i64).sum();
            let s: f64 = idx.iter().map(|&i| c[i].1).sum();
            for (&dur, (score, chosen)) in &states {
                let nd = dur + d;
                if nd > max_ms {
                    continue;
                }
                let ns = score + s;
                let better = next.get(&nd).is_none_or(|(bs, bc)| {
                    ns > *bs || (ns == *bs && chosen.iter().chain([&idx]).lt(bc.iter()))
                });
                if better {
                    let mut nc = chosen.clone();
                    nc.push(idx.clone());
                    next.insert(nd, (ns, nc));
                }
            }
        }
        states = next;
    }
    states
        .into_iter()
        .filter(|(d, _)| *d >= min_ms)
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.0.cmp(&a.0)))
        .map(|(_, (_, c))| c)
}

/// Ranking of a candidate emotion set; larger is better.
type SetScore = (usize, usize, std::cmp::Reverse<usize>, Vec<u8>);

/// Plans the subject's next session from unseen, non-excluded clips.
pub fn generate_session(
    profile: &SubjectProfile,
    pool: &[StimulusClip],
    constraints: &SessionConstraints,
) -> Result<SessionPlan> {
    constraints.validate()?;
    let shown = profile.shown_clips();
    let session_id = format!("{}-s{:02}", profile.subject_id, profile.sessions.len() + 1);

    let emotions = if constraints.personalized {
        PERSONALIZED_ORDER.to_vec()
    } else {
        choose_emotions(profile, constraints)?
    };
    let mut groups: Vec<Group> = Vec::with_capacity(emotions.len());
    for &e in &emotions {
        let c = candidates(profile, pool, &shown, e);
        if c.is_empty() {
            return Err(ProtocolError::PoolExhausted(e));
        }
        groups.push((e, c));
    }

    let selection: Vec<Vec<usize>> = if constraints.personalized {
        // one clip per emotion, the subject's own material first
        groups
            .iter()
            .map(|(_, c)| {
                let best = c.iter().position(|(clip, _)| clip.is_personal).unwrap_or(0);
                vec![best]
            })
            .collect()
    } else {
        let rests = constraints.rest_s * groups.len() as f64;
        greedy_fit(&groups, constraints, rests)
            .or_else(|| exhaustive_fit(&groups, constraints, rests))
            .ok_or_else(|| {
                ProtocolError::Infeasible(format!(
                    "no clip selection for {} fits {}-{} s",
                    emotions.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", "),
                    constraints.min_total_s,
                    constraints.max_total_s
                ))
            })?
    };

    let mut items = Vec::new();
    for ((e, c), sel) in groups.iter().zip(&selection) {
        items.push(PlanItem::Rest { duration_s: constraints.rest_s });
        for &i in sel {
            let clip = c[i].0;
            items.push(PlanItem::Clip {
                clip_id: clip.clip_id.clone(),
                target_emotion: *e,
                duration_s: clip.duration_s,
            });
        }
    }
    Ok(SessionPlan {
        schema_version: PLAN_SCHEMA_VERSION,
        session_id,
        planned_total_s: items.iter().map(PlanItem::duration_s).sum(),
        items,
        emotions_covered: emotions,
        personalized: constraints.personalized,
    })
}
