//! From-scratch classifiers: CART, random forest, a one-hidden-layer network
//! and an RBF-kernel SVM.
//!
//! All learners work on [`TrainingData`]: dense rows, class indices
//! `0..n_classes` ordered by label code, and the feature column ids. Whenever
//! votes or scores tie, the lowest class index (lowest label code) wins.

pub mod ann;
pub mod forest;
mod model;
pub mod svm;
pub mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Dataset, FeatureId};
use crate::signal::{EmotionLabel, Valence};

pub use ann::{train_ann, Activation, AnnModel, AnnParams};
pub use forest::{predict_forest, train_forest, variable_importance, ForestModel, ForestParams};
pub use model::{Model, TrainedModel, TrainerSpec, MODEL_FORMAT_VERSION};
pub use svm::{train_svm, SvmModel, SvmParams};
pub use tree::{train_tree, TreeModel, TreeParams};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("value error: {0}")]
    Value(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Train(String),
    #[error("prediction failed: {0}")]
    Predict(String),
    /// SMO hit its iteration cap; the best-so-far model is attached.
    #[error("SVM did not reach KKT tolerance within the iteration cap")]
    NotConverged(Box<SvmModel>),
}

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

/// Target class: an emotion, or a valence for the binary setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Emotion(EmotionLabel),
    Valence(Valence),
}

impl ClassLabel {
    pub fn code(self) -> u8 {
        match self {
            ClassLabel::Emotion(e) => e.code(),
            ClassLabel::Valence(Valence::Negative) => 0,
            ClassLabel::Valence(Valence::Positive) => 1,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Emotion(e) => write!(f, "{e}"),
            ClassLabel::Valence(v) => write!(f, "{v:?}"),
        }
    }
}

/// Dense training matrix with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    /// Ascending by code; `y` indexes into this.
    pub classes: Vec<ClassLabel>,
    pub columns: Vec<FeatureId>,
}

impl TrainingData {
    pub fn new(
        x: Vec<Vec<f64>>,
        labels: &[ClassLabel],
        columns: Vec<FeatureId>,
    ) -> Result<Self> {
        if x.len() != labels.len() {
            return Err(LearnError::Value(format!("{} rows but {} labels", x.len(), labels.len())));
        }
        if let Some(r) = x.iter().find(|r| r.len() != columns.len()) {
            return Err(LearnError::Value(format!(
                "row has {} values, expected {}",
                r.len(),
                columns.len()
            )));
        }
        if x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LearnError::Value("non-finite feature value".into()));
        }
        let mut classes: Vec<ClassLabel> = labels.to_vec();
        classes.sort_by_key(|c| c.code());
        classes.dedup();
        let y = labels
            .iter()
            .map(|l| classes.iter().position(|c| c == l).expect("present"))
            .collect();
        Ok(Self { x, y, classes, columns })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let labels: Vec<ClassLabel> = ds.labels().into_iter().map(ClassLabel::Emotion).collect();
        Self::new(ds.rows(), &labels, ds.feature_mask.features().to_vec())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.y.iter().map(|&k| self.classes[k]).collect()
    }

    /// Rows at `idx`, keeping the full class list so indices stay comparable.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            classes: self.classes.clone(),
            columns: self.columns.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for &k in &self.y {
            c[k] += 1;
        }
        c
    }
}

/// `1 - sum p_k^2` over class counts.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(LearnError::Value("gini impurity of an empty node".into()));
    }
    let t = total as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

/// Index of the maximum; first (lowest index) wins ties.
pub(crate) fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-column mean and sample std; zero spread maps to 1 so scaling is a no-op.
pub(crate) fn column_stats(x: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let mut means = vec![0.0; d];
    for r in x {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; d];
    for r in x {
        for ((s, v), m) in stds.iter_mut().zip(r).zip(&means) {
            *s += (v - m).powi(2);
        }
    }
    for s in &mut stds {
        *s = if n > 1.0 { (*s / (n - 1.0)).sqrt() } else { 0.0 };
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    (means, stds)
}

pub(crate) fn standardize(row: &[f64], means: &[f64], stds: &[f64]) -> Vec<f64> {
    row.iter().zip(means).zip(stds).map(|((v, m), s)| (v - m) / s).collect()
}

pub(crate) fn check_dim(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(LearnError::Predict(format!("feature vector has {got} values, model expects {expected}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_values() {
        assert_eq!(gini_impurity(&[5, 0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[5, 5]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[3, 1]).unwrap(), 0.375);
        assert!(matches!(gini_impurity(&[0, 0]), Err(LearnError::Value(_))));
    }

    #[test]
    fn class_indices_follow_codes() {
        let labels = [
            ClassLabel::Emotion(EmotionLabel::Content),
            ClassLabel::Emotion(EmotionLabel::Fear),
            ClassLabel::Emotion(EmotionLabel::Content),
        ];
        let d = TrainingData::new(vec![vec![0.0]; 3], &labels, vec![FeatureId::HrMean]).unwrap();
        assert_eq!(d.classes, vec![ClassLabel::Emotion(EmotionLabel::Fear), ClassLabel::Emotion(EmotionLabel::Content)]);
        assert_eq!(d.y, vec![1, 0, 1]);
        assert_eq!(d.class_counts(), vec![1, 2]);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1, 3, 3]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }
}
