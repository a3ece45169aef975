//! Hilbert-Huang time-frequency imaging.
//!
//! An epoch is split into intrinsic mode functions by empirical mode
//! decomposition; each mode's analytic signal yields instantaneous amplitude
//! and frequency, which are accumulated into a time x frequency raster. An
//! optional single-hidden-layer autoencoder compresses that raster.

mod autoencoder;
mod emd;
mod hilbert;
mod tfi;

pub use autoencoder::{encode, reduced_shape, train_autoencoder, Autoencoder, AutoencoderConfig};
pub use emd::{count_extrema, emd, EmdResult, Imf, DEFAULT_MAX_IMFS, DEFAULT_SIFT_TOL, MAX_SIFTS};
pub use hilbert::{hilbert_analytic, instantaneous_attrs, AnalyticSignal};
pub use tfi::{build_tfi, epoch_to_tfi, TfiConfig, TimeFrequencyImage};

use thiserror::Error;

use crate::nn::NnError;
use crate::optim::OptimError;

#[derive(Debug, Error, PartialEq)]
pub enum HhtError {
    #[error("input of {0} samples is too short")]
    TooShort(usize),
    #[error("non-finite sample")]
    NonFinite,
    #[error("all modes must share one length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid image geometry: {0}")]
    InvalidGeometry(String),
    #[error("latent size {latent} must be between 1 and the input size {input} (exclusive)")]
    InvalidLatentDim { latent: usize, input: usize },
    #[error("expected {expected} pixels, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no images to train on")]
    EmptyTrainingSet,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}
