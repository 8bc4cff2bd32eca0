//! Windowing and time-domain feature extraction.

mod dataset;
mod extract;
mod window;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::ChannelId;

pub use dataset::{build_dataset, read_dataset_csv, write_dataset_csv, ClipRanks, Dataset, LabeledInstance};
pub use extract::extract_features;
pub use window::{cut_windows, Window, WindowConfig};

pub const N_FEATURES: usize = 17;
pub const DEFAULT_WINDOW: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature error: {0}")]
    Feature(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// The 17 features, in their canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureId {
    HrvMean,
    HrvStd,
    BrMean,
    BrStd,
    HrpMean,
    HrpStd,
    BrSumSq,
    GsrSumSq,
    HrvMeanDiff,
    HrvStdDiff,
    GsrMean,
    GsrStd,
    SktMean,
    HrvMeanDiffSq,
    HrvStdDiffSq,
    HrMean,
    HrStd,
}

impl FeatureId {
    pub const ALL: [FeatureId; N_FEATURES] = [
        FeatureId::HrvMean,
        FeatureId::HrvStd,
        FeatureId::BrMean,
        FeatureId::BrStd,
        FeatureId::HrpMean,
        FeatureId::HrpStd,
        FeatureId::BrSumSq,
        FeatureId::GsrSumSq,
        FeatureId::HrvMeanDiff,
        FeatureId::HrvStdDiff,
        FeatureId::GsrMean,
        FeatureId::GsrStd,
        FeatureId::SktMean,
        FeatureId::HrvMeanDiffSq,
        FeatureId::HrvStdDiffSq,
        FeatureId::HrMean,
        FeatureId::HrStd,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn column_name(self) -> &'static str {
        match self {
            FeatureId::HrvMean => "HRV_mean",
            FeatureId::HrvStd => "HRV_std",
            FeatureId::BrMean => "BR_mean",
            FeatureId::BrStd => "BR_std",
            FeatureId::HrpMean => "HRP_mean",
            FeatureId::HrpStd => "HRP_std",
            FeatureId::BrSumSq => "BR_ssq",
            FeatureId::GsrSumSq => "GSR_ssq",
            FeatureId::HrvMeanDiff => "HRV_mean_diff",
            FeatureId::HrvStdDiff => "HRV_std_diff",
            FeatureId::GsrMean => "GSR_mean",
            FeatureId::GsrStd => "GSR_std",
            FeatureId::SktMean => "SKT_mean",
            FeatureId::HrvMeanDiffSq => "HRV_mean_diff_sq",
            FeatureId::HrvStdDiffSq => "HRV_std_diff_sq",
            FeatureId::HrMean => "HR_mean",
            FeatureId::HrStd => "HR_std",
        }
    }

    pub fn channel(self) -> ChannelId {
        use FeatureId::*;
        match self {
            HrvMean | HrvStd | HrvMeanDiff | HrvStdDiff | HrvMeanDiffSq | HrvStdDiffSq => ChannelId::HRV,
            BrMean | BrStd | BrSumSq => ChannelId::BR,
            HrpMean | HrpStd => ChannelId::HRP,
            GsrSumSq | GsrMean | GsrStd => ChannelId::GSR,
            SktMean => ChannelId::SKT,
            HrMean | HrStd => ChannelId::HR,
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column_name())
    }
}

impl FromStr for FeatureId {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureId::ALL
            .into_iter()
            .find(|f| f.column_name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FeatureError::Config(format!("unknown feature `{s}`")))
    }
}

/// Ordered, non-empty subset of features used for training.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureId>", into = "Vec<FeatureId>")]
pub struct FeatureMask(Vec<FeatureId>);

impl FeatureMask {
    pub fn new(features: impl IntoIterator<Item = FeatureId>) -> Result<Self> {
        let mut v: Vec<FeatureId> = features.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(FeatureError::Config("feature mask must not be empty".into()));
        }
        Ok(Self(v))
    }

    pub fn all() -> Self {
        Self(FeatureId::ALL.to_vec())
    }

    /// Everything except the leak-prone skin temperature.
    pub fn without_skt() -> Self {
        Self::all().without(FeatureId::SktMean).expect("16 features remain")
    }

    pub fn without(&self, f: FeatureId) -> Result<Self> {
        Self::new(self.0.iter().copied().filter(|&x| x != f))
    }

    pub fn with(&self, f: FeatureId) -> Self {
        Self::new(self.0.iter().copied().chain([f])).expect("non-empty")
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        self.0.contains(&f)
    }

    pub fn features(&self) -> &[FeatureId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn project(&self, full: &[f64; N_FEATURES]) -> Vec<f64> {
        self.0.iter().map(|f| full[f.index()]).collect()
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::without_skt()
    }
}

impl TryFrom<Vec<FeatureId>> for FeatureMask {
    type Error = FeatureError;

    fn try_from(v: Vec<FeatureId>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureMask> for Vec<FeatureId> {
    fn from(m: FeatureMask) -> Self {
        m.0
    }
}
