//! Pre-processing: resampling, IIR filtering, epoching and class balancing.

mod epochs;
mod filter;
mod resample;

pub use epochs::{oversample_classes, oversample_indices, segment_epochs, EpochSet};
pub use filter::{design_butterworth_bandpass, design_notch, filter_apply, Biquad, IirFilter};
pub use resample::{resample, TARGET_FS};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite sample or parameter")]
    NonFinite,
    #[error("frequency out of range: {0}")]
    FrequencyOutOfRange(String),
    #[error("invalid filter order {0}: must be even and at least 2")]
    InvalidOrder(usize),
    #[error("filter designed for {filter} Hz applied to {signal} Hz signal")]
    SampleRateMismatch { filter: f64, signal: f64 },
    #[error("signal of {duration_s} s is shorter than one {epoch_s} s epoch")]
    TooShort { duration_s: f64, epoch_s: f64 },
    #[error("epoch set has no labels")]
    MissingLabels,
    #[error("cannot balance an empty epoch set")]
    EmptyClass,
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    pub fs: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self, DspError> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(DspError::FrequencyOutOfRange(format!("sampling rate {fs}")));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(DspError::NonFinite);
        }
        Ok(Self { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}
