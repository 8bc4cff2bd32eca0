use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::learn::{ClassLabel, TrainingData};
use crate::signal::{EmotionLabel, Valence};

/// Negative = {Fear, SadAnger, Disgust}; positive = {AweRev, JoyAmus, Content}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMapping {
    pub negative: Vec<EmotionLabel>,
    pub positive: Vec<EmotionLabel>,
}

impl Default for BinaryMapping {
    fn default() -> Self {
        Self {
            negative: vec![EmotionLabel::Fear, EmotionLabel::SadAnger, EmotionLabel::Disgust],
            positive: vec![EmotionLabel::AweRev, EmotionLabel::JoyAmus, EmotionLabel::Content],
        }
    }
}

impl BinaryMapping {
    pub fn classes() -> [ClassLabel; 2] {
        [ClassLabel::Valence(Valence::Negative), ClassLabel::Valence(Valence::Positive)]
    }

    pub fn valence(&self, label: EmotionLabel) -> Result<Valence> {
        if self.negative.contains(&label) {
            Ok(Valence::Negative)
        } else if self.positive.contains(&label) {
            Ok(Valence::Positive)
        } else {
            Err(EvalError::Mapping(format!("{label} has no valence in the binary setup")))
        }
    }

    /// Emotions map to their valence; valences map to themselves.
    pub fn map(&self, c: ClassLabel) -> Result<ClassLabel> {
        match c {
            ClassLabel::Emotion(e) => Ok(ClassLabel::Valence(self.valence(e)?)),
            v @ ClassLabel::Valence(_) => Ok(v),
        }
    }
}

pub fn binarize_label(label: EmotionLabel) -> Result<Valence> {
    BinaryMapping::default().valence(label)
}

/// Relabels a six-class training set with valences.
pub fn binarize_data(data: &TrainingData) -> Result<TrainingData> {
    let mapping = BinaryMapping::default();
    let labels = data.labels().into_iter().map(|c| mapping.map(c)).collect::<Result<Vec<_>>>()?;
    Ok(TrainingData::new(data.x.clone(), &labels, data.columns.clone())?)
}

/// Collapses `(predicted, actual)` emotion pairs to valence pairs.
pub fn binarize_predictions(pairs: &[(ClassLabel, ClassLabel)]) -> Result<Vec<(ClassLabel, ClassLabel)>> {
    let mapping = BinaryMapping::default();
    pairs.iter().map(|&(p, a)| Ok((mapping.map(p)?, mapping.map(a)?))).collect()
}
