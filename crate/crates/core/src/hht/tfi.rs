use super::{emd, hilbert_analytic, instantaneous_attrs, HhtError, Imf, DEFAULT_MAX_IMFS, DEFAULT_SIFT_TOL};

/// Time x frequency amplitude raster, stored time-major (`t * freq_bins + f`).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencyImage {
    pub data: Vec<f64>,
    pub time_bins: usize,
    pub freq_bins: usize,
    /// Upper edge of the frequency axis (half the sampling rate).
    pub max_freq_hz: f64,
}

impl TimeFrequencyImage {
    pub fn zeros(time_bins: usize, freq_bins: usize, max_freq_hz: f64) -> Self {
        Self { data: vec![0.0; time_bins * freq_bins], time_bins, freq_bins, max_freq_hz }
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.data[t * self.freq_bins + f]
    }

    /// Total amplitude per frequency bin.
    pub fn freq_profile(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.freq_bins];
        for row in self.data.chunks_exact(self.freq_bins) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }
}

const BIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfiConfig {
    pub time_bins: usize,
    pub freq_bins: usize,
    pub max_imfs: usize,
    pub sift_tol: f64,
}

impl Default for TfiConfig {
    fn default() -> Self {
        Self { time_bins: 64, freq_bins: 32, max_imfs: DEFAULT_MAX_IMFS, sift_tol: DEFAULT_SIFT_TOL }
    }
}

/// Accumulate each mode's instantaneous amplitude at its (time, frequency)
/// cell, then scale so the largest cell is 1.
pub fn build_tfi(imfs: &[Imf], fs: f64, time_bins: usize, freq_bins: usize) -> Result<TimeFrequencyImage, HhtError> {
    if time_bins == 0 || freq_bins == 0 {
        return Err(HhtError::InvalidGeometry(format!("{time_bins} x {freq_bins}")));
    }
    let nyquist = fs / 2.0;
    let mut img = TimeFrequencyImage::zeros(time_bins, freq_bins, nyquist);
    let Some(first) = imfs.first() else {
        return Ok(img);
    };
    let n = first.samples.len();
    if let Some(other) = imfs.iter().find(|m| m.samples.len() != n) {
        return Err(HhtError::LengthMismatch(n, other.samples.len()));
    }
    if time_bins > n {
        return Err(HhtError::InvalidGeometry(format!("{time_bins} time bins for {n} samples")));
    }
    for imf in imfs {
        let (amp, freq) = instantaneous_attrs(&hilbert_analytic(&imf.samples)?, fs)?;
        for i in 0..n {
            let t = i * time_bins / n;
            // slack keeps tones sitting exactly on a bin edge out of the bin below
            let f = ((freq[i] / nyquist * freq_bins as f64 + BIN_SLACK).floor() as usize).min(freq_bins - 1);
            img.data[t * freq_bins + f] += amp[i];
        }
    }
    let peak = img.data.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        for v in &mut img.data {
            *v /= peak;
        }
    }
    Ok(img)
}

/// EMD followed by Hilbert-spectrum imaging of one epoch.
pub fn epoch_to_tfi(epoch: &[f64], fs: f64, cfg: &TfiConfig) -> Result<TimeFrequencyImage, HhtError> {
    let decomposition = emd(epoch, cfg.max_imfs, cfg.sift_tol)?;
    build_tfi(&decomposition.imfs, fs, cfg.time_bins, cfg.freq_bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn empty_list_gives_zero_image() {
        let img = build_tfi(&[], 64.0, 64, 32).unwrap();
        assert_eq!(img.data.len(), 64 * 32);
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_tone_concentrates_in_its_bin() {
        let imf = Imf { index: 0, samples: tone(8.0, 64.0, 1920) };
        let img = build_tfi(&[imf], 64.0, 64, 32).unwrap();
        let profile = img.freq_profile();
        let total: f64 = profile.iter().sum();
        // floor(8 / 32 * 32) = 8
        assert!(profile[8] / total >= 0.9, "{}", profile[8] / total);
        assert!((img.data.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
        assert!(img.data.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn two_tones_give_two_rows() {
        let fs = 64.0;
        let x: Vec<f64> = tone(4.0, fs, 1920).iter().zip(tone(12.0, fs, 1920)).map(|(a, b)| a + b).collect();
        let img = epoch_to_tfi(&x, fs, &TfiConfig::default()).unwrap();
        let profile = img.freq_profile();
        let total: f64 = profile.iter().sum();
        // modes are near- but not exactly pure tones, so allow the neighbouring bin
        let low = (profile[3] + profile[4]) / total;
        let high = (profile[11] + profile[12]) / total;
        assert!(low >= 0.3 && high >= 0.3 && low + high >= 0.9, "profile {profile:?}");
        let weaker = low.min(high) * total;
        for (k, &v) in profile.iter().enumerate() {
            if ![3, 4, 11, 12].contains(&k) {
                assert!(v < weaker, "bin {k} rivals a tone row");
            }
        }
    }

    #[test]
    fn geometry_errors() {
        let imf = Imf { index: 0, samples: vec![0.0; 16] };
        assert!(build_tfi(&[imf.clone()], 64.0, 32, 8).is_err());
        assert!(build_tfi(&[imf.clone()], 64.0, 0, 8).is_err());
        let short = Imf { index: 1, samples: vec![0.0; 8] };
        assert_eq!(build_tfi(&[imf, short], 64.0, 4, 4), Err(HhtError::LengthMismatch(16, 8)));
    }
}
