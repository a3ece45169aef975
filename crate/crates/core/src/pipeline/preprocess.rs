use serde::Serialize;

use super::{Dataset, PipelineError};
use crate::dsp::{self, design_butterworth_bandpass, design_notch, filter_apply, segment_epochs, TimeSeries};
use crate::edf_io::{Hypnogram, Recording, EPOCH_SECONDS};
use crate::hht::{encode, epoch_to_tfi, train_autoencoder, Autoencoder, AutoencoderConfig, TfiConfig, TimeFrequencyImage};

/// Mains notch is only attempted above this rate; below it a 50/60 Hz
/// component cannot be represented faithfully anyway.
const NOTCH_MIN_FS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessConfig {
    pub channel: usize,
    /// Mains frequency to notch, or `None` to skip.
    pub notch_hz: Option<f64>,
    pub notch_q: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub band_order: usize,
    pub target_fs: f64,
    pub epoch_s: f64,
    #[serde(skip)]
    pub tfi: TfiConfig,
    /// `None` keeps full-resolution time-frequency images.
    #[serde(skip)]
    pub autoencoder: Option<AutoencoderConfig>,
    /// Rescale every final image to zero mean and unit variance.
    pub standardize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            channel: 0,
            notch_hz: Some(50.0),
            notch_q: 30.0,
            band_lo_hz: 0.5,
            band_hi_hz: 30.0,
            band_order: 8,
            target_fs: dsp::TARGET_FS,
            epoch_s: EPOCH_SECONDS,
            tfi: TfiConfig::default(),
            autoencoder: Some(AutoencoderConfig::default()),
            standardize: true,
        }
    }
}

/// Filtered, resampled, segmented epochs of one channel.
pub fn condition_channel(
    rec: &Recording,
    hyp: Option<&Hypnogram>,
    cfg: &PreprocessConfig,
) -> Result<dsp::EpochSet, PipelineError> {
    let nch = rec.channels.len();
    if cfg.channel >= nch {
        return Err(PipelineError::InvalidConfig(format!(
            "channel {} requested, recording has {nch}",
            cfg.channel
        )));
    }
    let mut ts = TimeSeries::new(rec.channels[cfg.channel].clone(), rec.sample_rate(cfg.channel))?;
    if let Some(f0) = cfg.notch_hz {
        if ts.fs > NOTCH_MIN_FS && f0 < ts.fs / 2.0 {
            ts = filter_apply(&mut design_notch(ts.fs, f0, cfg.notch_q)?, &ts)?;
        }
    }
    if ts.fs != cfg.target_fs {
        ts = dsp::resample(&ts, cfg.target_fs)?;
    }
    let mut band = design_butterworth_bandpass(ts.fs, cfg.band_lo_hz, cfg.band_hi_hz, cfg.band_order)?;
    ts = filter_apply(&mut band, &ts)?;
    Ok(segment_epochs(&ts, hyp, cfg.epoch_s)?)
}

/// Time-frequency images (and labels, if a hypnogram is given) of one channel.
pub fn recording_images(
    rec: &Recording,
    hyp: Option<&Hypnogram>,
    cfg: &PreprocessConfig,
) -> Result<(Vec<TimeFrequencyImage>, Option<Vec<crate::SleepStage>>), PipelineError> {
    let epochs = condition_channel(rec, hyp, cfg)?;
    let images = epochs
        .epochs
        .iter()
        .map(|e| epoch_to_tfi(e, epochs.fs, &cfg.tfi))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((images, epochs.labels))
}

/// Full chain from a recording to a dataset of (optionally reduced) images.
/// Returns the trained autoencoder alongside when reduction is enabled.
pub fn preprocess_recording(
    rec: &Recording,
    hyp: Option<&Hypnogram>,
    cfg: &PreprocessConfig,
    provenance: &str,
    seed: u64,
) -> Result<(Dataset, Option<Autoencoder>), PipelineError> {
    let (images, labels) = recording_images(rec, hyp, cfg)?;
    match &cfg.autoencoder {
        None => Ok((finish_dataset(None, &images, labels, cfg, provenance, seed)?, None)),
        Some(ae_cfg) => {
            let ae_cfg = AutoencoderConfig { seed, ..ae_cfg.clone() };
            let ae = train_autoencoder(&images, &ae_cfg)?;
            let ds = finish_dataset(Some(&ae), &images, labels, cfg, provenance, seed)?;
            Ok((ds, Some(ae)))
        }
    }
}

/// Encodes (if `ae` is given) and standardizes images into a dataset. Use
/// this with a previously trained autoencoder so new recordings land in the
/// same latent space as the data a model was trained on.
pub fn finish_dataset(
    ae: Option<&Autoencoder>,
    images: &[TimeFrequencyImage],
    labels: Option<Vec<crate::SleepStage>>,
    cfg: &PreprocessConfig,
    provenance: &str,
    seed: u64,
) -> Result<Dataset, PipelineError> {
    let (h, w, mut data) = match ae {
        None => {
            let first = images.first().ok_or(PipelineError::EmptyDataset)?;
            (first.time_bins, first.freq_bins, images.iter().map(|i| i.data.clone()).collect::<Vec<_>>())
        }
        Some(ae) => {
            let (h, w) = ae.latent_shape();
            (h, w, images.iter().map(|i| encode(ae, i)).collect::<Result<Vec<_>, _>>()?)
        }
    };
    if cfg.standardize {
        data.iter_mut().for_each(|d| standardize(d));
    }
    Dataset::new(data, h, w, labels, provenance, seed)
}

/// Zero mean, unit variance; constant images become all zeros.
pub fn standardize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-12 { 1.0 / sd } else { 0.0 };
    x.iter_mut().for_each(|v| *v = (*v - mean) * scale);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edf_io::{generate_synthetic_recording, SynthSpec};
    use crate::SleepStage;

    #[test]
    fn synthetic_recording_to_dataset() {
        let spec = SynthSpec::balanced(&SleepStage::ALL, 2, 128.0, 2.0, 1);
        let (rec, hyp) = generate_synthetic_recording(&spec).unwrap();
        let cfg = PreprocessConfig { autoencoder: None, ..Default::default() };
        let (ds, ae) = preprocess_recording(&rec, Some(&hyp), &cfg, "synthetic", 1).unwrap();
        assert!(ae.is_none());
        assert_eq!(ds.len(), 10);
        assert_eq!((ds.height, ds.width), (64, 32));
        assert_eq!(ds.class_counts(), [2; 5]);

        let cfg = PreprocessConfig {
            autoencoder: Some(AutoencoderConfig { epochs: 2, ..Default::default() }),
            ..Default::default()
        };
        let (ds, ae) = preprocess_recording(&rec, None, &cfg, "synthetic", 1).unwrap();
        assert_eq!(ae.unwrap().latent_dim(), 256);
        assert_eq!((ds.height, ds.width), (16, 16));
        assert!(!ds.is_labeled());
    }

    #[test]
    fn bad_channel() {
        let spec = SynthSpec::balanced(&[SleepStage::Wake], 1, 64.0, 0.0, 1);
        let (rec, _) = generate_synthetic_recording(&spec).unwrap();
        let cfg = PreprocessConfig { channel: 3, ..Default::default() };
        assert!(matches!(condition_channel(&rec, None, &cfg), Err(PipelineError::InvalidConfig(_))));
    }
}
