use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_features, FeatureError, FeatureId, FeatureMask, Result, Window, N_FEATURES};
use crate::signal::EmotionLabel;

/// One window's full feature vector with its label and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub features: [f64; N_FEATURES],
    pub label: EmotionLabel,
    pub session_id: String,
    pub clip_id: Option<String>,
    pub window_start_s: f64,
}

/// Latest ranking score per clip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipRanks(BTreeMap<String, u8>);

impl ClipRanks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, clip_id: impl Into<String>, score: u8) {
        self.0.insert(clip_id.into(), score);
    }

    pub fn get(&self, clip_id: &str) -> Option<u8> {
        self.0.get(clip_id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, u8)> for ClipRanks {
    fn from_iter<I: IntoIterator<Item = (S, u8)>>(iter: I) -> Self {
        let mut r = Self::new();
        for (c, s) in iter {
            r.insert(c, s);
        }
        r
    }
}

/// Classification instances sharing one feature mask. Never contains `Rest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instances: Vec<LabeledInstance>,
    pub feature_mask: FeatureMask,
}

impl Dataset {
    pub fn new(instances: Vec<LabeledInstance>, feature_mask: FeatureMask) -> Result<Self> {
        if let Some(i) = instances.iter().find(|i| i.label.is_rest()) {
            return Err(FeatureError::Dataset(format!(
                "rest window at {}s in session {} cannot be classified",
                i.window_start_s, i.session_id
            )));
        }
        if let Some(i) = instances.iter().find(|i| i.features.iter().any(|v| !v.is_finite())) {
            return Err(FeatureError::Dataset(format!(
                "non-finite feature in session {} at {}s",
                i.session_id, i.window_start_s
            )));
        }
        Ok(Self { instances, feature_mask })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn with_mask(&self, mask: FeatureMask) -> Self {
        Self { instances: self.instances.clone(), feature_mask: mask }
    }

    /// Masked feature rows.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.instances.iter().map(|i| self.feature_mask.project(&i.features)).collect()
    }

    pub fn labels(&self) -> Vec<EmotionLabel> {
        self.instances.iter().map(|i| i.label).collect()
    }

    pub fn class_counts(&self) -> BTreeMap<EmotionLabel, usize> {
        let mut m = BTreeMap::new();
        for i in &self.instances {
            *m.entry(i.label).or_insert(0) += 1;
        }
        m
    }
}

/// Extracts features for every window and keeps the classifiable ones.
///
/// Rest windows are dropped. With `min_rank`, windows from clips ranked below
/// it are dropped too, and every clip must have a ranking.
pub fn build_dataset(
    windows: &[Window],
    mask: FeatureMask,
    min_rank: Option<u8>,
    rankings: &ClipRanks,
) -> Result<Dataset> {
    let kept: Vec<&Window> = windows
        .iter()
        .filter(|w| !w.label.is_rest())
        .map(|w| {
            let Some(min) = min_rank else { return Ok(Some(w)) };
            let clip = w.clip_id.as_deref().ok_or_else(|| {
                FeatureError::Dataset(format!("window at {}s has no clip to rank", w.start_s))
            })?;
            let rank = rankings
                .get(clip)
                .ok_or_else(|| FeatureError::Dataset(format!("no ranking for clip `{clip}`")))?;
            Ok((rank >= min).then_some(w))
        })
        .filter_map(Result::transpose)
        .collect::<Result<_>>()?;

    let mut instances = kept
        .par_iter()
        .map(|w| {
            Ok(LabeledInstance {
                features: extract_features(w)?,
                label: w.label,
                session_id: w.session_id.clone(),
                clip_id: w.clip_id.clone(),
                window_start_s: w.start_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    instances.sort_by(|a, b| {
        a.session_id.cmp(&b.session_id).then(a.window_start_s.total_cmp(&b.window_start_s))
    });
    Dataset::new(instances, mask)
}

fn header() -> Vec<String> {
    ["session_id", "window_start_s", "label", "clip_id"]
        .into_iter()
        .map(str::to_string)
        .chain(FeatureId::ALL.iter().map(|f| f.column_name().to_string()))
        .collect()
}

/// Dataset export: provenance columns then all 17 features.
pub fn write_dataset_csv<W: Write>(writer: W, instances: &[LabeledInstance]) -> Result<()> {
    let err = |e: csv::Error| FeatureError::Dataset(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header()).map_err(err)?;
    for i in instances {
        let mut rec = vec![
            i.session_id.clone(),
            i.window_start_s.to_string(),
            i.label.code().to_string(),
            i.clip_id.clone().unwrap_or_default(),
        ];
        rec.extend(i.features.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| FeatureError::Dataset(e.to_string()))
}

pub fn read_dataset_csv<R: Read>(reader: R) -> Result<Vec<LabeledInstance>> {
    let err = |e: csv::Error| FeatureError::Dataset(e.to_string());
    let mut rdr = csv::Reader::from_reader(reader);
    let got: Vec<String> = rdr.headers().map_err(err)?.iter().map(str::to_string).collect();
    if got != header() {
        return Err(FeatureError::Dataset(format!("unexpected dataset header: {}", got.join(","))));
    }
    rdr.records()
        .enumerate()
        .map(|(line, rec)| {
            let rec = rec.map_err(err)?;
            let bad = |what: &str| FeatureError::Dataset(format!("row {}: bad {what}", line + 2));
            let code: u8 = rec[2].parse().map_err(|_| bad("label"))?;
            let mut features = [0.0; N_FEATURES];
            for (k, f) in features.iter_mut().enumerate() {
                *f = rec[4 + k].parse().map_err(|_| bad(FeatureId::ALL[k].column_name()))?;
            }
            Ok(LabeledInstance {
                features,
                label: EmotionLabel::from_code(code).ok_or_else(|| bad("label"))?,
                session_id: rec[0].to_string(),
                clip_id: (!rec[3].is_empty()).then(|| rec[3].to_string()),
                window_start_s: rec[1].parse().map_err(|_| bad("window_start_s"))?,
            })
        })
        .collect()
}
