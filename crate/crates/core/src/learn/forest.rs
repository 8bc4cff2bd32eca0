//! Random forest with out-of-bag error and mean-decrease-in-Gini importance.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{columns, grow, validate, TreeModel, TreeParams};
use super::{argmax, check_dim, LearnError, Result, TrainingData};
use crate::features::FeatureId;
use crate::rng::{derive_seed, seeded};
use crate::signal::EmotionLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features sampled per split; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 500, mtry: None, min_leaf: 1 }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize) -> usize {
        self.mtry.unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub n_trees: usize,
    pub mtry: usize,
    pub seed: u64,
    pub columns: Vec<FeatureId>,
    pub n_classes: usize,
    /// Distinct in-bag row indices per tree, ascending.
    pub inbag: Vec<Vec<u32>>,
    /// Majority vote over trees for which the row was out of bag.
    pub oob_predictions: Vec<Option<usize>>,
    /// Error over rows with at least one out-of-bag vote.
    pub oob_error: f64,
    /// Number of rows with at least one out-of-bag vote.
    pub oob_covered: usize,
    /// Total Gini decrease per feature, averaged over trees.
    pub importance: Vec<f64>,
}

impl ForestModel {
    pub fn votes(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(x.len(), self.columns.len())?;
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[argmax(t.leaf_for(x))] += 1;
        }
        Ok(votes)
    }

    /// Majority vote; ties go to the lowest class index.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.votes(x)?))
    }
}

pub fn train_forest(data: &TrainingData, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if params.n_trees == 0 {
        return Err(LearnError::Config("n_trees must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(LearnError::Train("cannot grow a forest on an empty dataset".into()));
    }
    let p = data.n_features();
    let mtry = params.resolved_mtry(p);
    let tree_params = TreeParams { min_leaf: params.min_leaf, ..TreeParams::unpruned(mtry) };
    validate(&tree_params, p)?;

    let n = data.len();
    let cols = columns(data);
    let k = data.n_classes();
    let grown: Vec<(TreeModel, Vec<u32>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(seed, t as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut inbag: Vec<u32> = rows.iter().map(|&i| i as u32).collect();
            inbag.sort_unstable();
            inbag.dedup();
            (grow(&cols, &data.y, k, rows, &tree_params, &mut rng), inbag)
        })
        .collect();
    let (trees, inbag): (Vec<TreeModel>, Vec<Vec<u32>>) = grown.into_iter().unzip();

    let mut votes = vec![vec![0usize; k]; n];
    let mut in_tree = vec![false; n];
    for (tree, bag) in trees.iter().zip(&inbag) {
        in_tree.iter_mut().for_each(|b| *b = false);
        for &i in bag {
            in_tree[i as usize] = true;
        }
        for i in (0..n).filter(|&i| !in_tree[i]) {
            votes[i][argmax(tree.leaf_for(&data.x[i]))] += 1;
        }
    }
    let oob_predictions: Vec<Option<usize>> =
        votes.iter().map(|v| (v.iter().any(|&c| c > 0)).then(|| argmax(v))).collect();
    let covered: Vec<(usize, usize)> = oob_predictions
        .iter()
        .zip(&data.y)
        .filter_map(|(p, &y)| p.map(|p| (p, y)))
        .collect();
    let oob_error = if covered.is_empty() {
        0.0
    } else {
        covered.iter().filter(|(p, y)| p != y).count() as f64 / covered.len() as f64
    };

    let mut importance = vec![0.0; p];
    for t in &trees {
        for (f, d) in t.split_decreases() {
            importance[f] += d;
        }
    }
    importance.iter_mut().for_each(|v| *v /= params.n_trees as f64);

    Ok(ForestModel {
        trees,
        n_trees: params.n_trees,
        mtry,
        seed,
        columns: data.columns.clone(),
        n_classes: k,
        inbag,
        oob_predictions,
        oob_error,
        oob_covered: covered.len(),
        importance,
    })
}

/// Predicts an emotion for a forest trained on emotion labels.
pub fn predict_forest(model: &ForestModel, classes: &[EmotionLabel], features: &[f64]) -> Result<EmotionLabel> {
    if classes.len() != model.n_classes {
        return Err(LearnError::Predict(format!(
            "{} class labels supplied for a {}-class forest",
            classes.len(),
            model.n_classes
        )));
    }
    Ok(classes[model.predict_index(features)?])
}

/// Features sorted by mean Gini decrease, most important first.
pub fn variable_importance(model: &ForestModel) -> Vec<(FeatureId, f64)> {
    let mut ranked: Vec<(FeatureId, f64)> =
        model.columns.iter().copied().zip(model.importance.iter().copied()).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}
