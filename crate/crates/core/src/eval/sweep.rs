use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binarize_data, EvalError, EvalReport, Evaluator, Result};
use crate::features::{build_dataset, cut_windows, ClipRanks, Dataset, FeatureMask, WindowConfig};
use crate::learn::TrainingData;
use crate::signal::LabeledSignalSet;

/// Dataset-building choices shared by every point of a sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub mask: FeatureMask,
    pub min_rank: Option<u8>,
    pub rankings: ClipRanks,
}

impl PipelineParams {
    /// cut -> extract -> build over all sessions for one window size.
    pub fn dataset(&self, sessions: &[LabeledSignalSet], w: usize) -> Result<Dataset> {
        let cfg = WindowConfig::new(w)?;
        let windows: Vec<_> = sessions.iter().flat_map(|s| cut_windows(s, &cfg)).collect();
        let ds = build_dataset(&windows, self.mask.clone(), self.min_rank, &self.rankings)?;
        if ds.is_empty() {
            return Err(EvalError::EmptyDataset(format!("window size {w} yields no instances")));
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window: usize,
    pub six_class: EvalReport,
    pub binary: EvalReport,
}

/// Reruns the full pipeline per window size and evaluates the six-class and
/// binary setups. Rows come back in ascending window order.
pub fn window_sweep(
    sessions: &[LabeledSignalSet],
    sizes: &[usize],
    params: &PipelineParams,
    evaluator: &Evaluator,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() {
        return Err(EvalError::Config("window sweep needs at least one size".into()));
    }
    let mut rows: Vec<SweepRow> = sizes
        .par_iter()
        .map(|&w| {
            let ds = params.dataset(sessions, w)?;
            let six = TrainingData::from_dataset(&ds)?;
            let bin = binarize_data(&six)?;
            let mut six_class = evaluator.evaluate(&six, seed)?;
            let mut binary = evaluator.evaluate(&bin, seed)?;
            for r in [&mut six_class, &mut binary] {
                r.setup.window = w;
                r.setup.min_rank = params.min_rank;
            }
            Ok(SweepRow { window: w, six_class, binary })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.window);
    Ok(rows)
}
