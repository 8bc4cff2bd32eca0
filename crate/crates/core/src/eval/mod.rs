//! Experimental harness: cross-validation, OOB evaluation, confusion
//! matrices, binary collapse, window sweeps, SKT ablation, classifier
//! comparison and a synthetic subject generator.

mod ablation;
mod binary;
mod compare;
mod confusion;
mod cv;
mod report;
pub mod synth;
mod sweep;

use thiserror::Error;

use crate::features::FeatureError;
use crate::learn::LearnError;
use crate::signal::SignalError;

pub use ablation::{ablation_skt, AblationReport};
pub use binary::{binarize_data, binarize_label, binarize_predictions, BinaryMapping};
pub use compare::{compare_classifiers, default_contenders, ComparisonReport, ComparisonRow};
pub use confusion::ConfusionMatrix;
pub use cv::{cross_validate, fold_assignment, oob_evaluate, Evaluator};
pub use report::{render_summary, EvalMethod, EvalReport, SetupDescriptor};
pub use sweep::{window_sweep, PipelineParams, SweepRow};
pub use synth::{generate_synthetic_subject, ScheduleShape, SktMode, SynthSpec, SyntheticSubject};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("config error: {0}")]
    Config(String),
    #[error("mapping error: {0}")]
    Mapping(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
