use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::HhtError;

/// `re` is the input, `im` its Hilbert transform.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSignal {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl AnalyticSignal {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

/// Analytic signal by the frequency-domain method: forward DFT, zero the
/// negative frequencies, double the positive ones (DC and Nyquist kept),
/// inverse DFT.
pub fn hilbert_analytic(x: &[f64]) -> Result<AnalyticSignal, HhtError> {
    let n = x.len();
    if n < 2 {
        return Err(HhtError::TooShort(n));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HhtError::NonFinite);
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= w;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(AnalyticSignal {
        // the real part is the input by construction; keep it exact
        re: x.to_vec(),
        im: buf.iter().map(|c| c.im * scale).collect(),
    })
}

/// Instantaneous amplitude (modulus) and frequency in Hz.
///
/// Frequency is the central difference of the unwrapped phase (one-sided at
/// the ends), clamped to `[0, fs/2]`. Samples with vanishing amplitude get
/// frequency 0.
pub fn instantaneous_attrs(a: &AnalyticSignal, fs: f64) -> Result<(Vec<f64>, Vec<f64>), HhtError> {
    let n = a.len();
    if a.im.len() != n {
        return Err(HhtError::LengthMismatch(n, a.im.len()));
    }
    if a.re.iter().chain(&a.im).any(|v| !v.is_finite()) {
        return Err(HhtError::NonFinite);
    }
    let amp: Vec<f64> = a.re.iter().zip(&a.im).map(|(r, i)| r.hypot(*i)).collect();
    let peak = amp.iter().cloned().fold(0.0, f64::max);
    if n < 2 || peak == 0.0 {
        return Ok((amp, vec![0.0; n]));
    }
    let mut phase: Vec<f64> = a.re.iter().zip(&a.im).map(|(r, i)| i.atan2(*r)).collect();
    for i in 1..n {
        let mut d = phase[i] - phase[i - 1];
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        phase[i] = phase[i - 1] + d;
    }
    let to_hz = fs / (2.0 * PI);
    let nyquist = fs / 2.0;
    let floor = 1e-12 * peak;
    let freq = (0..n)
        .map(|i| {
            if amp[i] <= floor {
                return 0.0;
            }
            let d = if i == 0 {
                phase[1] - phase[0]
            } else if i == n - 1 {
                phase[n - 1] - phase[n - 2]
            } else {
                0.5 * (phase[i + 1] - phase[i - 1])
            };
            (d * to_hz).clamp(0.0, nyquist)
        })
        .collect();
    Ok((amp, freq))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).cos()).collect()
    }

    #[test]
    fn cosine_quadrature_is_sine() {
        let fs = 64.0;
        let x = cos_tone(8.0, fs, 640);
        let a = hilbert_analytic(&x).unwrap();
        for i in 32..608 {
            let expected = (2.0 * PI * 8.0 * i as f64 / fs).sin();
            assert!((a.im[i] - expected).abs() <= 1e-6);
        }
        assert_eq!(a.re, x);
    }

    #[test]
    fn constant_has_zero_quadrature() {
        let a = hilbert_analytic(&[2.5; 37]).unwrap();
        assert!(a.im.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn negation_and_linearity() {
        let x: Vec<f64> = (0..101).map(|i| ((i * i) as f64 * 0.01).sin()).collect();
        let y: Vec<f64> = (0..101).map(|i| (i as f64 * 0.3).cos()).collect();
        let ax = hilbert_analytic(&x).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let an = hilbert_analytic(&neg).unwrap();
        for (p, q) in ax.im.iter().zip(&an.im) {
            assert!((p + q).abs() < 1e-12);
        }
        let ay = hilbert_analytic(&y).unwrap();
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let ac = hilbert_analytic(&combo).unwrap();
        for i in 0..101 {
            assert!((ac.im[i] - (2.0 * ax.im[i] - 0.5 * ay.im[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn tone_attributes() {
        let fs = 64.0;
        let x: Vec<f64> = cos_tone(8.0, fs, 1920);
        let a = hilbert_analytic(&x).unwrap();
        let (amp, freq) = instantaneous_attrs(&a, fs).unwrap();
        for i in 64..1856 {
            assert!((amp[i] - 1.0).abs() <= 0.01);
            assert!((freq[i] - 8.0).abs() <= 0.08);
        }
        let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let (amp3, freq3) = instantaneous_attrs(&hilbert_analytic(&x3).unwrap(), fs).unwrap();
        for i in 0..1920 {
            assert!((amp3[i] - 3.0 * amp[i]).abs() < 1e-9);
            assert!((freq3[i] - freq[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_signal_attributes() {
        let a = hilbert_analytic(&[0.0; 64]).unwrap();
        let (amp, freq) = instantaneous_attrs(&a, 64.0).unwrap();
        assert!(amp.iter().all(|&v| v == 0.0));
        assert!(freq.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(hilbert_analytic(&[1.0]), Err(HhtError::TooShort(1)));
        assert_eq!(hilbert_analytic(&[1.0, f64::INFINITY]), Err(HhtError::NonFinite));
    }
}
