use serde::{Deserialize, Serialize};

use super::{EvalReport, Evaluator, Result};
use crate::features::{Dataset, FeatureId};
use crate::learn::TrainingData;

/// Two evaluations differing only in whether SKT_mean is a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub with_skt: EvalReport,
    pub without_skt: EvalReport,
}

impl AblationReport {
    /// `without - with`; positive when SKT lowers the error.
    pub fn delta(&self) -> f64 {
        self.without_skt.mean_error - self.with_skt.mean_error
    }
}

/// Evaluates `data` with and without SKT_mean under the same seed, so CV
/// folds and forest bootstrap streams coincide.
pub fn ablation_skt(data: &Dataset, evaluator: &Evaluator, seed: u64) -> Result<AblationReport> {
    let with = data.with_mask(data.feature_mask.with(FeatureId::SktMean));
    let without = data.with_mask(data.feature_mask.without(FeatureId::SktMean)?);
    Ok(AblationReport {
        with_skt: evaluator.evaluate(&TrainingData::from_dataset(&with)?, seed)?,
        without_skt: evaluator.evaluate(&TrainingData::from_dataset(&without)?, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth::{generate_synthetic_subject, SynthSpec};
    use crate::eval::PipelineParams;
    use crate::learn::TrainerSpec;

    #[test]
    fn masks_differ_by_skt_only() {
        let subject = generate_synthetic_subject(&SynthSpec::protocol(1), 2).unwrap();
        let ds = PipelineParams::default().dataset(&subject.ingest().unwrap(), 32).unwrap();
        let eval = Evaluator::CrossValidation { trainer: TrainerSpec::tree(), k: 5 };
        let r = ablation_skt(&ds, &eval, 3).unwrap();
        let mut a = r.with_skt.setup.mask.clone();
        a.retain(|f| *f != FeatureId::SktMean);
        assert_eq!(a, r.without_skt.setup.mask);
        assert_eq!(r.with_skt.setup.mask.len(), r.without_skt.setup.mask.len() + 1);
        assert_eq!(r.with_skt.fold_assignment, r.without_skt.fold_assignment);
    }
}
