//! Dataset builds and training runs over stored recordings.

use std::collections::BTreeMap;

use emobase::eval::{binarize_data, EvalReport, Evaluator, PipelineParams};
use emobase::features::{read_dataset_csv, write_dataset_csv, ClipRanks, Dataset, FeatureId, FeatureMask};
use emobase::learn::{TrainedModel, TrainerSpec, TrainingData};
use emobase::protocol::SubjectProfile;
use emobase::signal::pipeline::{ingest_session, IngestConfig};
use emobase::signal::EmotionLabel;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::store::{sha256_hex, BlobKind, Store};

/// Identifier length for run and dataset ids, in hex digits.
const SHORT_ID: usize = 16;

fn short_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_vec(value).expect("descriptor serializes");
    sha256_hex(&canonical)[..SHORT_ID].to_string()
}

/// Accepts a feature by column name (`SKT_mean`) or identifier (`SktMean`).
pub fn parse_feature(s: &str) -> Result<FeatureId> {
    s.parse::<FeatureId>()
        .or_else(|_| serde_json::from_value(serde_json::Value::String(s.to_string())))
        .map_err(|_| ServiceError::Validation(format!("unknown feature `{s}`")))
}

pub fn parse_mask<S: AsRef<str>>(names: &[S]) -> Result<FeatureMask> {
    let ids = names.iter().map(|n| parse_feature(n.as_ref())).collect::<Result<Vec<_>>>()?;
    FeatureMask::new(ids).map_err(ServiceError::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub w: usize,
    pub min_rank: Option<u8>,
    pub mask: FeatureMask,
}

/// Metadata of a content-addressed dataset build. The CSV always holds all
/// 17 feature columns; `params.mask` selects the training columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub dataset_id: String,
    pub subject_id: String,
    pub params: DatasetParams,
    pub csv_sha256: String,
    pub n_instances: usize,
    pub class_counts: BTreeMap<EmotionLabel, usize>,
    pub sessions: Vec<String>,
}

/// Latest score per clip across all of the subject's sessions.
pub fn latest_ranks(profile: &SubjectProfile) -> ClipRanks {
    profile.rankings.iter().map(|r| (r.clip_id.clone(), r.score)).collect()
}

/// ingest -> window -> features over every stored recording of `subject`.
pub fn build_dataset(store: &Store, subject: &str, params: DatasetParams) -> Result<DatasetMeta> {
    let profile = store.profile(subject)?;
    let recordings = store.recordings(subject)?;
    if recordings.is_empty() {
        return Err(ServiceError::Validation(format!("subject `{subject}` has no recordings")));
    }
    let cfg = IngestConfig::default();
    let sessions = recordings
        .iter()
        .map(|r| Ok(ingest_session(&r.manifest, &r.streams()?, &cfg)?.signals))
        .collect::<Result<Vec<_>>>()?;
    let pipeline = PipelineParams { mask: params.mask.clone(), min_rank: params.min_rank, rankings: latest_ranks(&profile) };
    let ds = pipeline.dataset(&sessions, params.w)?;

    let mut csv = Vec::new();
    write_dataset_csv(&mut csv, &ds.instances)?;
    let csv_sha256 = store.put_blob(BlobKind::Dataset, &csv)?;
    let dataset_id = short_hash(&(subject, &params, &csv_sha256));
    let meta = DatasetMeta {
        dataset_id,
        subject_id: subject.to_string(),
        params,
        csv_sha256,
        n_instances: ds.len(),
        class_counts: ds.class_counts(),
        sessions: recordings.iter().map(|r| r.manifest.session_id.clone()).collect(),
    };
    store.put_dataset_meta(&meta)?;
    Ok(meta)
}

/// Reads a dataset back, verifying the CSV against its recorded hash.
pub fn load_dataset(store: &Store, meta: &DatasetMeta) -> Result<Dataset> {
    let csv = store.blob(BlobKind::Dataset, &meta.csv_sha256)?;
    let instances = read_dataset_csv(csv.as_slice())?;
    Ok(Dataset::new(instances, meta.params.mask.clone())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Done,
    Failed,
}

/// Everything besides the data that determines a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub window: usize,
    pub mask: FeatureMask,
    pub min_rank: Option<u8>,
    /// Short trainer name: tree, rf, ann or svm.
    pub classifier: String,
    pub seed: u64,
    pub binary: bool,
}

/// Same params and same dataset hash give the same `run_id` and, by
/// determinism of the pipeline, the same report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub run_id: String,
    pub subject_id: String,
    pub dataset_id: String,
    pub dataset_sha256: String,
    pub params: RunParams,
    pub status: RunStatus,
    pub report_sha256: Option<String>,
    pub model_sha256: Option<String>,
    pub error: Option<String>,
}

impl RunDescriptor {
    pub fn new(meta: &DatasetMeta, classifier: &str, seed: u64, binary: bool) -> Result<Self> {
        let trainer = TrainerSpec::from_short_name(classifier).ok_or_else(|| {
            ServiceError::Validation(format!("unknown classifier `{classifier}` (expected tree, rf, ann or svm)"))
        })?;
        let params = RunParams {
            window: meta.params.w,
            mask: meta.params.mask.clone(),
            min_rank: meta.params.min_rank,
            classifier: trainer.short_name().to_string(),
            seed,
            binary,
        };
        Ok(Self {
            run_id: short_hash(&(&meta.subject_id, &meta.csv_sha256, &params)),
            subject_id: meta.subject_id.clone(),
            dataset_id: meta.dataset_id.clone(),
            dataset_sha256: meta.csv_sha256.clone(),
            params,
            status: RunStatus::Pending,
            report_sha256: None,
            model_sha256: None,
            error: None,
        })
    }

    fn trainer(&self) -> TrainerSpec {
        TrainerSpec::from_short_name(&self.params.classifier).expect("classifier checked at creation")
    }
}

/// Evaluates the setup (forest OOB, 10-fold CV otherwise), fits a model on
/// all data, stores both as blobs and returns the finished descriptor.
pub fn execute(store: &Store, run: &RunDescriptor) -> Result<RunDescriptor> {
    let csv = store.blob(BlobKind::Dataset, &run.dataset_sha256)?;
    let ds = Dataset::new(read_dataset_csv(csv.as_slice())?, run.params.mask.clone())?;
    let mut data = TrainingData::from_dataset(&ds)?;
    if run.params.binary {
        data = binarize_data(&data)?;
    }
    let trainer = run.trainer();
    let seed = run.params.seed;
    let mut report = Evaluator::for_trainer(trainer.clone()).evaluate(&data, seed)?.without_timing();
    report.setup.window = run.params.window;
    report.setup.min_rank = run.params.min_rank;
    let model = TrainedModel::fit(&trainer, &data, seed)?;

    let mut model_json = Vec::new();
    model.save(&mut model_json)?;
    let report_json = serde_json::to_vec_pretty(&report).map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(RunDescriptor {
        status: RunStatus::Done,
        report_sha256: Some(store.put_blob(BlobKind::Report, &report_json)?),
        model_sha256: Some(store.put_blob(BlobKind::Model, &model_json)?),
        error: None,
        ..run.clone()
    })
}

/// Runs `execute` and records a failure on the descriptor instead of
/// propagating it.
pub fn execute_recorded(store: &Store, run: &RunDescriptor) -> Result<RunDescriptor> {
    let done = match execute(store, run) {
        Ok(d) => d,
        Err(e @ (ServiceError::Integrity(_) | ServiceError::Internal(_))) => return Err(e),
        Err(e) => RunDescriptor { status: RunStatus::Failed, error: Some(e.to_string()), ..run.clone() },
    };
    store.put_run(&done)?;
    Ok(done)
}

pub fn load_report(store: &Store, run: &RunDescriptor) -> Result<Option<EvalReport>> {
    let Some(hash) = &run.report_sha256 else { return Ok(None) };
    let bytes = store.blob(BlobKind::Report, hash)?;
    serde_json::from_slice(&bytes)
        .map(Some)
        .map_err(|e| ServiceError::Integrity(format!("report {hash} is unreadable: {e}")))
}

pub fn load_model(store: &Store, model_sha256: &str) -> Result<TrainedModel> {
    let bytes = store.blob(BlobKind::Model, model_sha256)?;
    TrainedModel::load(bytes.as_slice()).map_err(|e| ServiceError::Integrity(format!("model {model_sha256}: {e}")))
}

/// Marks runs left pending by a previous process as failed so that a retry
/// starts them afresh.
pub fn fail_interrupted(store: &Store) -> Result<usize> {
    let mut n = 0;
    for run in store.runs()?.into_iter().filter(|r| r.status == RunStatus::Pending) {
        store.put_run(&RunDescriptor {
            status: RunStatus::Failed,
            error: Some("interrupted by a service restart".into()),
            ..run
        })?;
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_parse_by_column_or_identifier() {
        assert_eq!(parse_feature("SKT_mean").unwrap(), FeatureId::SktMean);
        assert_eq!(parse_feature("SktMean").unwrap(), FeatureId::SktMean);
        assert!(parse_feature("SKT_max").is_err());
        assert_eq!(parse_mask(&["HR_mean", "HrMean"]).unwrap().len(), 1);
    }

    #[test]
    fn run_id_tracks_params_and_data() {
        let meta = DatasetMeta {
            dataset_id: "d".into(),
            subject_id: "s".into(),
            params: DatasetParams { w: 32, min_rank: None, mask: FeatureMask::default() },
            csv_sha256: "ab".into(),
            n_instances: 0,
            class_counts: BTreeMap::new(),
            sessions: vec![],
        };
        let a = RunDescriptor::new(&meta, "rf", 1, false).unwrap();
        assert_eq!(a.run_id, RunDescriptor::new(&meta, "forest", 1, false).unwrap().run_id);
        assert_ne!(a.run_id, RunDescriptor::new(&meta, "rf", 2, false).unwrap().run_id);
        let other = DatasetMeta { csv_sha256: "cd".into(), ..meta.clone() };
        assert_ne!(a.run_id, RunDescriptor::new(&other, "rf", 1, false).unwrap().run_id);
        assert!(matches!(RunDescriptor::new(&meta, "knn", 1, false), Err(ServiceError::Validation(_))));
    }
}
