use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, EvalError, EvalMethod, EvalReport, Result, SetupDescriptor};
use crate::learn::{train_forest, ClassLabel, ForestParams, TrainerSpec, TrainingData};
use crate::rng::{derive_seed, seeded};

/// Shuffles `0..n` with `seed`; the instance at shuffled position `p` goes to
/// fold `p % k`, so fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(EvalError::Config(format!("k = {k}; cross-validation needs k >= 2")));
    }
    if k > n {
        return Err(EvalError::Config(format!("k = {k} folds exceeds {n} instances")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

fn is_binary(data: &TrainingData) -> bool {
    data.classes.iter().all(|c| matches!(c, ClassLabel::Valence(_)))
}

/// k-fold cross-validation. Fold `f` trains with `derive_seed(seed, f)`.
/// The mean error is the average of per-fold error rates; the confusion
/// matrix pools every held-out prediction.
pub fn cross_validate(data: &TrainingData, trainer: &TrainerSpec, k: usize, seed: u64) -> Result<EvalReport> {
    let start = Instant::now();
    let n = data.len();
    let fold = fold_assignment(n, k, seed)?;
    let results: Vec<Vec<(usize, usize)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold[i] == f);
            let model = trainer.fit(&data.subset(&train), derive_seed(seed, f as u64))?;
            test.iter().map(|&i| Ok((i, model.predict_index(&data.x[i])?))).collect()
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![None; n];
    let mut fold_errors = Vec::with_capacity(k);
    for r in &results {
        let wrong = r.iter().filter(|&&(i, p)| p != data.y[i]).count();
        fold_errors.push(wrong as f64 / r.len() as f64);
        for &(i, p) in r {
            predictions[i] = Some(p);
        }
    }
    let confusion = ConfusionMatrix::from_indices(
        data.classes.clone(),
        predictions.iter().zip(&data.y).map(|(p, &y)| (p.expect("every instance tested"), y)),
    );
    let mut setup = SetupDescriptor::new(trainer.clone(), data.columns.clone(), EvalMethod::CrossValidation { k });
    setup.binary = is_binary(data);
    Ok(EvalReport {
        setup,
        confusion,
        mean_error: fold_errors.iter().sum::<f64>() / k as f64,
        fold_errors,
        fold_assignment: fold,
        predictions,
        seed,
        n_instances: n,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

/// Random-forest out-of-bag evaluation; uncovered rows are left out of the
/// confusion matrix.
pub fn oob_evaluate(data: &TrainingData, params: &ForestParams, seed: u64) -> Result<EvalReport> {
    let start = Instant::now();
    if data.is_empty() {
        return Err(EvalError::EmptyDataset("no instances to evaluate".into()));
    }
    let model = train_forest(data, params, seed)?;
    let confusion = ConfusionMatrix::from_indices(
        data.classes.clone(),
        model.oob_predictions.iter().zip(&data.y).filter_map(|(p, &y)| p.map(|p| (p, y))),
    );
    let mut setup =
        SetupDescriptor::new(TrainerSpec::Forest(params.clone()), data.columns.clone(), EvalMethod::Oob);
    setup.binary = is_binary(data);
    Ok(EvalReport {
        setup,
        confusion,
        mean_error: model.oob_error,
        fold_errors: Vec::new(),
        fold_assignment: Vec::new(),
        predictions: model.oob_predictions,
        seed,
        n_instances: data.len(),
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

/// How a setup is scored: forest OOB, or k-fold CV of any trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "evaluator", rename_all = "snake_case")]
pub enum Evaluator {
    Oob(ForestParams),
    CrossValidation { trainer: TrainerSpec, k: usize },
}

impl Default for Evaluator {
    fn default() -> Self {
        Evaluator::Oob(ForestParams::default())
    }
}

impl Evaluator {
    /// Forest OOB for the forest, 10-fold CV for the others.
    pub fn for_trainer(trainer: TrainerSpec) -> Self {
        match trainer {
            TrainerSpec::Forest(p) => Evaluator::Oob(p),
            t => Evaluator::CrossValidation { trainer: t, k: 10 },
        }
    }

    pub fn evaluate(&self, data: &TrainingData, seed: u64) -> Result<EvalReport> {
        if data.is_empty() {
            return Err(EvalError::EmptyDataset("no instances to evaluate".into()));
        }
        match self {
            Evaluator::Oob(p) => oob_evaluate(data, p, seed),
            Evaluator::CrossValidation { trainer, k } => cross_validate(data, trainer, *k, seed),
        }
    }
}
