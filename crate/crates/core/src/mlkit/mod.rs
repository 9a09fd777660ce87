//! Delay-class prediction toolkit: mutual-information feature selection,
//! dataset balancing, stratified cross-validation and a small
//! feed-forward classifier.
//!
//! Everything here is seeded-deterministic: the same dataset, parameters
//! and seed reproduce the same selection order, splits, weights and
//! metrics bit for bit.

mod dataset;
mod metrics;
mod mi;
mod model_io;
mod nn;
mod sampling;
mod select;

use std::io;

use thiserror::Error;

pub use dataset::{build_dataset, ClassScheme, Dataset, DatasetBuildStats, FEATURE_NAMES};
pub use metrics::{f1_score, majority_baseline, report_from_predictions, ClassReport};
pub use mi::{apply_bins, bin_feature, entropy_bits, mutual_information, Binning};
pub use model_io::{load_model, load_model_path, save_model, save_model_path};
pub use nn::{
    batch_gradient, batch_loss, cross_validate, grid_search, train, CvResult, GridPoint,
    ModelGradient, TrainOutcome, TrainParams, TrainedModel,
};
pub use sampling::{balance, stratified_kfold, FoldSplit};
pub use select::{md_select, SelectionStep};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("length mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("feature '{0}' is constant; it cannot be normalized")]
    ConstantFeature(String),
    #[error("joint histogram would have {cells} cells (limit {limit})")]
    HistogramTooLarge { cells: u128, limit: u128 },
    #[error("class {0} has no samples")]
    EmptyClass(usize),
    #[error("balancing infeasible: {0}")]
    BalanceInfeasible(String),
    #[error("class {class} has {count} samples, fewer than k = {k}")]
    Stratification { class: usize, count: usize, k: usize },
    #[error("training diverged at epoch {epoch} (non-finite loss); lower the learning rate")]
    Divergence { epoch: usize },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, MlError>;
