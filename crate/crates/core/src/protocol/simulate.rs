//! Randomized pools and simulated subjects for exercising the adaptive loop.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{
    generate_session, ingest_ranking, seed_profile, Questionnaire, Ranking, RecencyClass, Result, SessionConstraints,
    SessionPlan, StimulusClip, SubjectProfile,
};
use crate::rng::Rng;
use crate::signal::{EmotionLabel, Valence};

const TAGS_PER_EMOTION: usize = 6;

fn tag(e: EmotionLabel, k: usize) -> String {
    format!("{}-{k}", e.name().to_lowercase())
}

/// `per_emotion` clips per emotion with one or two tags from a six-tag
/// vocabulary each. Positive emotions get some compilations.
pub fn random_pool(rng: &mut Rng, per_emotion: usize) -> Vec<StimulusClip> {
    let mut pool = Vec::new();
    for e in EmotionLabel::EMOTIONS {
        for k in 0..per_emotion {
            let mut tags = BTreeSet::from([tag(e, rng.random_range(0..TAGS_PER_EMOTION))]);
            if rng.random_bool(0.4) {
                tags.insert(tag(e, rng.random_range(0..TAGS_PER_EMOTION)));
            }
            let compilation = e.valence() == Some(Valence::Positive) && rng.random_bool(0.1);
            let duration_s = if compilation {
                rng.random_range(600..=1500) as f64
            } else {
                rng.random_range(180..=720) as f64
            };
            pool.push(StimulusClip {
                clip_id: format!("{}-{k:03}", e.name().to_lowercase()),
                title: format!("{e} clip {k}"),
                source_url: format!("https://example.org/{}/{k}", e.code()),
                target_emotion: e,
                tags,
                duration_s,
                is_compilation: compilation,
                is_personal: rng.random_bool(0.05),
                recency_class: if rng.random_bool(0.5) { RecencyClass::Contemporary } else { RecencyClass::Classic },
            });
        }
    }
    pool
}

/// A subject whose response to a clip is the mean true weight of its tags
/// plus Gaussian noise, mapped to the 1-10 scale.
#[derive(Debug, Clone)]
pub struct SimulatedSubject {
    pub weights: BTreeMap<EmotionLabel, BTreeMap<String, f64>>,
    pub noise_std: f64,
}

impl SimulatedSubject {
    pub fn random(rng: &mut Rng, noise_std: f64) -> Self {
        let weights = EmotionLabel::EMOTIONS
            .iter()
            .map(|&e| (e, (0..TAGS_PER_EMOTION).map(|k| (tag(e, k), rng.random::<f64>())).collect()))
            .collect();
        Self { weights, noise_std }
    }

    pub fn true_response(&self, clip: &StimulusClip) -> f64 {
        let w = &self.weights[&clip.target_emotion];
        clip.tags.iter().map(|t| w.get(t).copied().unwrap_or(0.5)).sum::<f64>() / clip.tags.len().max(1) as f64
    }

    pub fn rate(&self, clip: &StimulusClip, session_id: &str, rng: &mut Rng) -> Ranking {
        let noise = Normal::new(0.0, self.noise_std).expect("finite std").sample(rng);
        let score = (1.0 + 9.0 * (self.true_response(clip) + noise)).round().clamp(1.0, 10.0) as u8;
        Ranking::new(clip.clip_id.clone(), session_id, score)
    }
}

/// Runs the loop generate -> watch -> rank for `sessions` rounds and returns
/// the profile and the mean score of each session.
pub fn run_adaptive_loop(
    pool: &[StimulusClip],
    subject: &SimulatedSubject,
    sessions: usize,
    rng: &mut Rng,
) -> Result<(SubjectProfile, Vec<f64>)> {
    let mut profile = seed_profile("sim", Questionnaire::neutral(), pool)?;
    let cons = SessionConstraints::default();
    let mut means = Vec::with_capacity(sessions);
    for _ in 0..sessions {
        let plan: SessionPlan = generate_session(&profile, pool, &cons)?;
        profile.sessions.push(plan.clone());
        let mut total = 0.0;
        let mut n = 0;
        for id in plan.clip_ids() {
            let clip = pool.iter().find(|c| c.clip_id == id).expect("planned clip in pool");
            let r = subject.rate(clip, &plan.session_id, rng);
            total += r.score as f64;
            n += 1;
            profile = ingest_ranking(&profile, pool, r)?;
        }
        means.push(total / n as f64);
    }
    Ok((profile, means))
}

/// Least-squares slope of `values` against their index.
pub fn trend(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = values.iter().sum::<f64>() / n;
    let (num, den) = values.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, y)| {
        let dx = i as f64 - mx;
        (a + dx * (y - my), b + dx * dx)
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn trend_of_line() {
        assert!((trend(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-12);
        assert_eq!(trend(&[5.0, 5.0, 5.0]), 0.0);
        assert!(trend(&[3.0, 2.0]) < 0.0);
    }

    #[test]
    fn loop_runs_and_pool_is_valid() {
        let mut rng = seeded(3);
        let pool = random_pool(&mut rng, 40);
        super::super::validate_pool(&pool).unwrap();
        let subject = SimulatedSubject::random(&mut rng, 0.05);
        let (profile, means) = run_adaptive_loop(&pool, &subject, 6, &mut rng).unwrap();
        assert_eq!(means.len(), 6);
        assert_eq!(profile.completed_sessions(), 6);
    }
}
