//! Personalized emotion-baseline pipeline.
//!
//! The crate covers the full path from raw per-device biosignal recordings to
//! trained emotion classifiers, plus the ranking-driven stimulus session
//! generator used to collect the baseline in the first place.
//!
//! - [`signal`]: ingestion, alignment to a shared clock, resampling, median
//!   filtering, per-session normalization and labeling from a session schedule.
//! - [`features`]: non-overlapping windowing and the 17 time-domain features.
//! - [`learn`]: CART, random forest (OOB + Gini importance), a one-hidden-layer
//!   network and an RBF-kernel SVM trained with SMO.
//! - [`eval`]: cross-validation, confusion matrices, binary collapse, window
//!   sweeps, SKT ablation, classifier comparison and a synthetic subject.
//! - [`protocol`]: stimulus pool, rankings, subject profiles, session
//!   generation, plan validation and convergence tracking.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod features;
pub mod learn;
pub mod protocol;
pub mod rng;
pub mod signal;

pub use features::{Dataset, FeatureId, FeatureMask, LabeledInstance, WindowConfig};
pub use signal::{ChannelId, EmotionLabel, TimeSeries, Valence};
