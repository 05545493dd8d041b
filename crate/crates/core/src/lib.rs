//! Recognition-reliability toolkit.
//!
//! Trains one-vs-all regularized least squares classifiers on feature-vector
//! streams — batch or one example at a time via rank-one Cholesky updates —
//! and measures how reliably they recognize: accuracy distributions over
//! random class subsets, confidence level curves, majority-vote temporal
//! filtering, cross-session matrices, and a final "datasheet" stating how
//! many objects are recognizable at a target accuracy per confidence level.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod manifest;
pub mod model;
pub mod reliability;
pub mod seed;
pub mod synth;
pub mod temporal;

pub use dataset::{FeatureDataset, FrameRecord, SelectFilter, Selected, Split};
pub use error::{Error, Result};
pub use eval::{evaluate, CrossCondition, CrossMatrix, EvalResult, LearningCurve};
pub use manifest::{load_dataset, save_dataset, FeatureEncoding};
pub use model::{encode_labels, RlsModel};
pub use reliability::{
    confidence, datasheet, level_curve, sample_class_subsets, subset_accuracy_distribution,
    AccuracyDistribution, ConfidenceCurve, CurvePlan, Datasheet, SubsetTrialPlan,
};
pub use synth::{synth_generate, SynthSpec};
pub use temporal::{
    filter_sweep, filter_trace, iid_majority_bound, reliability_with_filter, FilterConfig,
    PredictionTrace, TieRule,
};
