use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;
use crate::features::{FeatureId, DEFAULT_WINDOW};
use crate::learn::TrainerSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EvalMethod {
    Oob,
    CrossValidation { k: usize },
}

/// Everything that determines an evaluation besides the data and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupDescriptor {
    pub classifier: TrainerSpec,
    pub mask: Vec<FeatureId>,
    pub min_rank: Option<u8>,
    pub window: usize,
    pub binary: bool,
    pub method: EvalMethod,
}

impl SetupDescriptor {
    pub fn new(classifier: TrainerSpec, mask: Vec<FeatureId>, method: EvalMethod) -> Self {
        Self { classifier, mask, min_rank: None, window: DEFAULT_WINDOW, binary: false, method }
    }

    /// Sort key for order-independent assembly of concurrent results.
    pub fn sort_key(&self) -> (usize, bool, bool, Option<u8>, String, usize) {
        (
            self.window,
            self.binary,
            self.mask.contains(&FeatureId::SktMean),
            self.min_rank,
            self.classifier.short_name().to_string(),
            self.mask.len(),
        )
    }

    pub fn label(&self) -> String {
        let method = match self.method {
            EvalMethod::Oob => "oob".to_string(),
            EvalMethod::CrossValidation { k } => format!("{k}-fold"),
        };
        let setup = if self.binary { "binary" } else { "six-class" };
        let rank = self.min_rank.map(|r| format!(" rank>={r}")).unwrap_or_default();
        format!(
            "{} {setup} w={} features={} {method}{rank}",
            self.classifier.short_name(),
            self.window,
            self.mask.len()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setup: SetupDescriptor,
    pub confusion: ConfusionMatrix,
    /// OOB error, or the mean of per-fold errors.
    pub mean_error: f64,
    /// Empty for OOB.
    pub fold_errors: Vec<f64>,
    /// Fold index per instance; empty for OOB.
    pub fold_assignment: Vec<usize>,
    /// Predicted class index per instance; `None` when never out of bag.
    pub predictions: Vec<Option<usize>>,
    pub seed: u64,
    pub n_instances: usize,
    /// Wall-clock time; the only field not reproducible across runs.
    pub elapsed_ms: u64,
}

impl EvalReport {
    /// The report with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { elapsed_ms: 0, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.setup.label());
        let _ = writeln!(
            s,
            "instances={} seed={} mean error={:.1}%",
            self.n_instances,
            self.seed,
            100.0 * self.mean_error
        );
        if !self.fold_errors.is_empty() {
            let folds: Vec<String> = self.fold_errors.iter().map(|e| format!("{:.1}", 100.0 * e)).collect();
            let _ = writeln!(s, "fold errors (%): {}", folds.join(" "));
        }
        s.push_str(&self.confusion.render());
        s
    }
}

/// Aligned table of several reports, one row each, sorted by setup.
pub fn render_summary(reports: &[EvalReport]) -> String {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.setup.sort_key());
    let labels: Vec<String> = sorted.iter().map(|r| r.setup.label()).collect();
    let width = labels.iter().map(String::len).max().unwrap_or(5).max(5);
    let mut s = format!("{:<width$} {:>10} {:>10}\n", "setup", "instances", "error(%)");
    for (r, l) in sorted.iter().zip(&labels) {
        let _ = writeln!(s, "{l:<width$} {:>10} {:>10.1}", r.n_instances, 100.0 * r.mean_error);
    }
    s
}
