use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    train_ann, train_forest, train_svm, train_tree, AnnModel, AnnParams, ClassLabel, ForestModel,
    ForestParams, LearnError, Result, SvmModel, SvmParams, TrainingData, TreeModel, TreeParams,
};
use crate::features::FeatureId;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Which classifier to fit, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainerSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Ann(AnnParams),
    Svm(SvmParams),
}

impl TrainerSpec {
    pub fn tree() -> Self {
        TrainerSpec::Tree(TreeParams::default())
    }

    pub fn forest() -> Self {
        TrainerSpec::Forest(ForestParams::default())
    }

    pub fn ann() -> Self {
        TrainerSpec::Ann(AnnParams::default())
    }

    pub fn svm() -> Self {
        TrainerSpec::Svm(SvmParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrainerSpec::Tree(_) => "Decision Tree",
            TrainerSpec::Forest(_) => "Random Forests",
            TrainerSpec::Ann(_) => "Artificial Neural Network",
            TrainerSpec::Svm(_) => "Support Vector Machines",
        }
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            TrainerSpec::Tree(_) => "tree",
            TrainerSpec::Forest(_) => "rf",
            TrainerSpec::Ann(_) => "ann",
            TrainerSpec::Svm(_) => "svm",
        }
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        match name {
            "tree" | "dt" => Some(Self::tree()),
            "rf" | "forest" => Some(Self::forest()),
            "ann" | "nn" => Some(Self::ann()),
            "svm" => Some(Self::svm()),
            _ => None,
        }
    }

    /// Fits the classifier. A non-converged SVM is still returned; its
    /// machines carry `converged = false`.
    pub fn fit(&self, data: &TrainingData, seed: u64) -> Result<Model> {
        Ok(match self {
            TrainerSpec::Tree(p) => Model::Tree(train_tree(data, p, seed)?),
            TrainerSpec::Forest(p) => Model::Forest(train_forest(data, p, seed)?),
            TrainerSpec::Ann(p) => Model::Ann(train_ann(data, p, seed)?),
            TrainerSpec::Svm(p) => match train_svm(data, p) {
                Ok(m) => Model::Svm(m),
                Err(LearnError::NotConverged(m)) => Model::Svm(*m),
                Err(e) => return Err(e),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Ann(AnnModel),
    Svm(SvmModel),
}

impl Model {
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        match self {
            Model::Tree(m) => m.predict_index(x),
            Model::Forest(m) => m.predict_index(x),
            Model::Ann(m) => m.predict_index(x),
            Model::Svm(m) => m.predict_index(x),
        }
    }
}

/// A fitted model with the column and class mapping needed to use it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub columns: Vec<FeatureId>,
    pub classes: Vec<ClassLabel>,
    pub seed: u64,
    pub trainer: TrainerSpec,
    pub model: Model,
}

impl TrainedModel {
    pub fn fit(trainer: &TrainerSpec, data: &TrainingData, seed: u64) -> Result<Self> {
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            columns: data.columns.clone(),
            classes: data.classes.clone(),
            seed,
            trainer: trainer.clone(),
            model: trainer.fit(data, seed)?,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        Ok(self.classes[self.model.predict_index(x)?])
    }

    pub fn save<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self).map_err(|e| LearnError::Value(format!("serializing model: {e}")))
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let m: Self =
            serde_json::from_reader(r).map_err(|e| LearnError::Value(format!("reading model: {e}")))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Value(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}
