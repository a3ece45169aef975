use std::f64::consts::PI;

use super::{DspError, TimeSeries};

/// Working rate of the whole pipeline.
pub const TARGET_FS: f64 = 64.0;

/// Kernel half-width in periods of the lower of the two rates.
const HALF_WIDTH: f64 = 16.0;
/// Kaiser beta for roughly 60 dB stopband.
const KAISER_BETA: f64 = 5.65;
/// Cutoff as a fraction of the lower sampling rate (0.9 of its Nyquist).
const CUTOFF_FRACTION: f64 = 0.45;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// The kernel cutoff sits at 0.45 of the lower rate, so downsampling rejects
/// content above the new Nyquist. Taps are renormalized per output sample,
/// which keeps DC exact including the edges.
pub fn resample(ts: &TimeSeries, target_fs: f64) -> Result<TimeSeries, DspError> {
    if ts.samples.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if !(target_fs > 0.0 && target_fs.is_finite()) {
        return Err(DspError::FrequencyOutOfRange(format!("target rate {target_fs}")));
    }
    if (target_fs - ts.fs).abs() < 1e-12 {
        return Ok(ts.clone());
    }
    let n_in = ts.samples.len();
    let n_out = ((n_in as f64 * target_fs / ts.fs).round() as usize).max(1);
    let low = ts.fs.min(target_fs);
    let cutoff = CUTOFF_FRACTION * low;
    let half = HALF_WIDTH / low;
    let i0_beta = bessel_i0(KAISER_BETA);

    let mut out = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let t = k as f64 / target_fs;
        let first = (((t - half) * ts.fs).ceil().max(0.0)) as usize;
        let last = (((t + half) * ts.fs).floor() as isize).min(n_in as isize - 1);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        if last >= first as isize {
            for n in first..=last as usize {
                let tau = t - n as f64 / ts.fs;
                let u = tau / half;
                let win = bessel_i0(KAISER_BETA * (1.0 - u * u).max(0.0).sqrt()) / i0_beta;
                let w = 2.0 * cutoff * sinc(2.0 * cutoff * tau) * win;
                acc += w * ts.samples[n];
                wsum += w;
            }
        }
        out.push(if wsum.abs() > 1e-12 { acc / wsum } else { 0.0 });
    }
    Ok(TimeSeries { samples: out, fs: target_fs })
}
