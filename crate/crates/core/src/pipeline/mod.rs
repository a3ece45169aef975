//! Datasets, splits, training, evaluation and experiment reports.

mod dataset;
mod experiment;
mod metrics;
mod preprocess;
mod split;
mod train;

pub use dataset::{Dataset, DATASET_MAGIC};
pub use experiment::{run_experiment, AggregateReport, ExperimentReport, FoldReport, SplitMode, Spread};
pub use metrics::{mean, std_dev, BinaryCounts, MetricsReport};
pub use preprocess::{
    condition_channel, finish_dataset, preprocess_recording, recording_images, standardize, PreprocessConfig,
};
pub use split::{holdout_split, kfold_split, FoldPlan, DEFAULT_FOLDS, DEFAULT_TEST_FRACTION};
pub use train::{
    argmax, check_dims, evaluate, predict, train, EpochRecord, OptimizerChoice, TrainConfig, TrainOutcome,
    DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_ORTHO_LAMBDA, DEFAULT_SGD_LR,
};

use thiserror::Error;

use crate::dsp::DspError;
use crate::edf_io::EdfError;
use crate::hht::HhtError;
use crate::nn::NnError;
use crate::optim::OptimError;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("empty input")]
    EmptyInput,
    #[error("too few items: {items} available, at least {needed} required")]
    TooFewItems { items: usize, needed: usize },
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed dataset cache: {0}")]
    BadCache(String),
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error(transparent)]
    Edf(#[from] EdfError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Hht(#[from] HhtError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}
