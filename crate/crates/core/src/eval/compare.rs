use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binarize_data, EvalReport, Evaluator, Result};
use crate::features::Dataset;
use crate::learn::{Activation, AnnParams, TrainerSpec, TrainingData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub classifier: String,
    pub error: f64,
    pub report: EvalReport,
}

/// Binary-setup error per classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.classifier.len()).max().unwrap_or(10).max(10);
        let mut s = format!("{:<width$} {:>20}\n", "Classifier", "Prediction Error (%)");
        for r in &self.rows {
            let _ = writeln!(s, "{:<width$} {:>20.1}", r.classifier, 100.0 * r.error);
        }
        s
    }
}

/// Tree, RBF-activation network, SVM and forest with their default settings.
pub fn default_contenders() -> Vec<TrainerSpec> {
    vec![
        TrainerSpec::tree(),
        TrainerSpec::Ann(AnnParams { activation: Activation::GaussianRbf, ..Default::default() }),
        TrainerSpec::svm(),
        TrainerSpec::forest(),
    ]
}

/// Scores each trainer on the binary relabeling of `data`: the forest by
/// OOB, the others by `k`-fold CV. Rows keep the order of `trainers`.
pub fn compare_classifiers(data: &Dataset, trainers: &[TrainerSpec], k: usize, seed: u64) -> Result<ComparisonReport> {
    let binary = binarize_data(&TrainingData::from_dataset(data)?)?;
    let rows = trainers
        .par_iter()
        .map(|t| {
            let evaluator = match t {
                TrainerSpec::Forest(p) => Evaluator::Oob(p.clone()),
                t => Evaluator::CrossValidation { trainer: t.clone(), k },
            };
            let report = evaluator.evaluate(&binary, seed)?;
            Ok(ComparisonRow { classifier: t.name().to_string(), error: report.mean_error, report })
        })
        .collect::<Result<_>>()?;
    Ok(ComparisonReport { seed, rows })
}
