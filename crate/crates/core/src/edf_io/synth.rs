use std::f64::consts::PI;

use chrono::NaiveDate;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{EdfError, EdfHeader, Hypnogram, Recording, SignalSpec, SleepStage, EPOCH_SECONDS};
use crate::rng::{seeded, sub_seed, Rng};

/// Physical range of synthetic channels in microvolts.
const PHYS_LIMIT: f64 = 1000.0;

/// Parameters for a labeled synthetic recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub channels: usize,
    /// Whole seconds; at least `stage_sequence.len() * 30`.
    pub duration_s: f64,
    pub fs: f64,
    pub stage_sequence: Vec<SleepStage>,
    /// Standard deviation of additive white noise in microvolts.
    pub noise_level: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// One 30 s epoch per listed stage.
    pub fn from_stages(stages: Vec<SleepStage>, fs: f64, noise_level: f64, seed: u64) -> Self {
        Self {
            channels: 1,
            duration_s: stages.len() as f64 * EPOCH_SECONDS,
            fs,
            stage_sequence: stages,
            noise_level,
            seed,
        }
    }

    /// `per_stage` consecutive epochs of each listed stage, in order.
    pub fn balanced(stages: &[SleepStage], per_stage: usize, fs: f64, noise_level: f64, seed: u64) -> Self {
        let seq = stages
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, per_stage))
            .collect();
        Self::from_stages(seq, fs, noise_level, seed)
    }

    fn validate(&self) -> Result<usize, EdfError> {
        let bad = |m: &str| Err(EdfError::InvalidSpec(m.to_string()));
        if !(self.fs > 0.0) || !(self.duration_s > 0.0) {
            return bad("duration and sampling rate must be positive");
        }
        if self.fs < 64.0 {
            return bad("sampling rate must be at least 64 Hz");
        }
        if self.fs.fract() != 0.0 {
            return bad("sampling rate must be a whole number of Hz");
        }
        if self.duration_s.fract() != 0.0 {
            return bad("duration must be a whole number of seconds");
        }
        if self.stage_sequence.is_empty() {
            return bad("stage sequence is empty");
        }
        if self.channels == 0 {
            return bad("at least one channel is required");
        }
        if self.stage_sequence.len() as f64 * EPOCH_SECONDS > self.duration_s {
            return bad("stage sequence is longer than the recording");
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise level must be non-negative");
        }
        Ok(self.fs as usize)
    }
}

/// Seed of the template generator for one (channel, epoch) cell.
pub fn epoch_seed(seed: u64, channel: usize, epoch: usize) -> u64 {
    sub_seed(sub_seed(seed, channel as u64), epoch as u64)
}

fn add_tone(out: &mut [f64], fs: f64, freq: f64, amp: f64, phase: f64) {
    for (i, v) in out.iter_mut().enumerate() {
        *v += amp * (2.0 * PI * freq * i as f64 / fs + phase).sin();
    }
}

fn random_tone(out: &mut [f64], fs: f64, lo: f64, hi: f64, amp: f64, rng: &mut Rng) {
    let f = rng.random_range(lo..hi);
    let phase = rng.random_range(0.0..2.0 * PI);
    add_tone(out, fs, f, amp, phase);
}

/// Hann-windowed 12-14 Hz burst of 1-2 s centered somewhere in `[from, to)`.
fn spindle(out: &mut [f64], fs: f64, from: usize, to: usize, rng: &mut Rng) {
    let len = (rng.random_range(1.0..2.0) * fs) as usize;
    let f = rng.random_range(12.0..14.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let span = to.saturating_sub(from).saturating_sub(len).max(1);
    let start = from + rng.random_range(0..span);
    for k in 0..len.min(out.len().saturating_sub(start)) {
        let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos();
        out[start + k] += 40.0 * w * (2.0 * PI * f * k as f64 / fs + phase).sin();
    }
}

/// Noise-free waveform (microvolts) for one epoch of `stage`.
///
/// Wake: 8-12 Hz alpha over a broadband floor. S1: 4-7 Hz theta.
/// S2: theta plus two 12-14 Hz spindles. SWS: high-amplitude 0.5-2 Hz delta.
/// REM: low-amplitude mixture spread over 4-10 Hz.
pub fn stage_template(stage: SleepStage, n: usize, fs: f64, rng: &mut Rng) -> Vec<f64> {
    let mut x = vec![0.0; n];
    match stage {
        SleepStage::Wake => {
            random_tone(&mut x, fs, 8.0, 12.0, 25.0, rng);
            random_tone(&mut x, fs, 8.0, 12.0, 15.0, rng);
            for _ in 0..12 {
                random_tone(&mut x, fs, 0.5, 30.0, 3.0, rng);
            }
        }
        SleepStage::S1 => {
            random_tone(&mut x, fs, 4.0, 7.0, 25.0, rng);
            random_tone(&mut x, fs, 4.0, 7.0, 15.0, rng);
        }
        SleepStage::S2 => {
            random_tone(&mut x, fs, 4.0, 7.0, 20.0, rng);
            random_tone(&mut x, fs, 4.0, 7.0, 10.0, rng);
            spindle(&mut x, fs, 0, n / 2, rng);
            spindle(&mut x, fs, n / 2, n, rng);
        }
        SleepStage::SWS => {
            random_tone(&mut x, fs, 0.5, 2.0, 60.0, rng);
            random_tone(&mut x, fs, 0.5, 2.0, 40.0, rng);
        }
        SleepStage::REM => {
            random_tone(&mut x, fs, 4.0, 6.0, 8.0, rng);
            random_tone(&mut x, fs, 6.0, 8.0, 8.0, rng);
            random_tone(&mut x, fs, 8.0, 10.0, 8.0, rng);
        }
    }
    x
}

/// Build a labeled recording whose epochs follow the stage templates.
///
/// Each (channel, epoch) draws its template from [`epoch_seed`] and its noise
/// from an independent stream, so the output is a pure function of the spec.
pub fn generate_synthetic_recording(spec: &SynthSpec) -> Result<(Recording, Hypnogram), EdfError> {
    let fs = spec.validate()?;
    let total = spec.duration_s as usize * fs;
    let epoch_len = (EPOCH_SECONDS as usize) * fs;
    let n_epochs = total.div_ceil(epoch_len);
    let last = *spec.stage_sequence.last().expect("validated non-empty");

    let mut channels = Vec::with_capacity(spec.channels);
    for ch in 0..spec.channels {
        let mut noise_rng = seeded(sub_seed(spec.seed ^ 0x6E6F_6973_65, ch as u64));
        let mut data = Vec::with_capacity(total);
        for e in 0..n_epochs {
            let stage = spec.stage_sequence.get(e).copied().unwrap_or(last);
            let len = epoch_len.min(total - e * epoch_len);
            let mut rng = seeded(epoch_seed(spec.seed, ch, e));
            let mut x = stage_template(stage, epoch_len, fs as f64, &mut rng);
            x.truncate(len);
            if spec.noise_level > 0.0 {
                for v in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut noise_rng);
                    *v += spec.noise_level * z;
                }
            }
            data.extend(x.into_iter().map(|v| v.clamp(-PHYS_LIMIT, PHYS_LIMIT)));
        }
        channels.push(data);
    }

    let signals = (0..spec.channels)
        .map(|i| SignalSpec::eeg(&format!("EEG {}", i + 1), -PHYS_LIMIT, PHYS_LIMIT, fs))
        .collect();
    let start = NaiveDate::from_ymd_opt(2000, 1, 1)
        .and_then(|d| d.and_hms_opt(22, 0, 0))
        .expect("valid constant date");
    let header = EdfHeader::new(
        "synthetic",
        &format!("seed {}", spec.seed),
        start,
        spec.duration_s as i64,
        1.0,
        signals,
    );
    let rec = Recording::new(header, channels)?;
    Ok((rec, Hypnogram::new(spec.stage_sequence.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edf_io::{parse_edf, write_edf};

    /// Fraction of energy in `[lo, hi]` Hz by direct DFT.
    fn band_energy_fraction(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
        let n = x.len();
        let mut band = 0.0;
        let mut total = 0.0;
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * i) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            let p = re * re + im * im;
            let f = k as f64 * fs / n as f64;
            total += p;
            if f >= lo && f <= hi {
                band += p;
            }
        }
        band / total
    }

    #[test]
    fn zero_noise_is_pure_template() {
        let spec = SynthSpec::from_stages(vec![SleepStage::Wake], 64.0, 0.0, 3);
        let (rec, hyp) = generate_synthetic_recording(&spec).unwrap();
        let expected = stage_template(SleepStage::Wake, 1920, 64.0, &mut seeded(epoch_seed(3, 0, 0)));
        assert_eq!(rec.channels[0], expected);
        assert_eq!(hyp.stages, vec![SleepStage::Wake]);
    }

    #[test]
    fn deterministic_bytes() {
        let spec = SynthSpec::balanced(&SleepStage::ALL, 1, 128.0, 5.0, 11);
        let a = write_edf(&generate_synthetic_recording(&spec).unwrap().0).unwrap();
        let b = write_edf(&generate_synthetic_recording(&spec).unwrap().0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sws_energy_in_delta_band() {
        let spec = SynthSpec::from_stages(vec![SleepStage::SWS], 64.0, 5.0, 21);
        let (rec, _) = generate_synthetic_recording(&spec).unwrap();
        let frac = band_energy_fraction(&rec.channels[0], 64.0, 0.5, 2.0);
        assert!(frac >= 0.7, "delta fraction {frac}");
    }

    #[test]
    fn round_trip_seed_7() {
        let mut spec = SynthSpec::balanced(&SleepStage::ALL, 1, 100.0, 5.0, 7);
        spec.channels = 3;
        let (rec, _) = generate_synthetic_recording(&spec).unwrap();
        let back = parse_edf(&write_edf(&rec).unwrap()).unwrap();
        assert_eq!(back.header, rec.header);
        let half_step = rec.header.signals[0].gain() / 2.0;
        for (a, b) in rec.channels.iter().zip(&back.channels) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= half_step + 1e-12);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SynthSpec::from_stages(vec![SleepStage::Wake], 32.0, 0.0, 0);
        assert!(matches!(generate_synthetic_recording(&spec), Err(EdfError::InvalidSpec(_))));
        spec.fs = 128.0;
        spec.duration_s = 0.0;
        assert!(matches!(generate_synthetic_recording(&spec), Err(EdfError::InvalidSpec(_))));
        spec.duration_s = 30.0;
        spec.stage_sequence.clear();
        assert!(matches!(generate_synthetic_recording(&spec), Err(EdfError::InvalidSpec(_))));
    }

    #[test]
    fn hypnogram_fits_recording() {
        let mut spec = SynthSpec::balanced(&[SleepStage::S2, SleepStage::REM], 2, 64.0, 1.0, 5);
        spec.duration_s = 135.0;
        let (rec, hyp) = generate_synthetic_recording(&spec).unwrap();
        assert!(hyp.duration_s() <= rec.duration_s());
        assert_eq!(rec.channels[0].len(), 135 * 64);
    }
}
