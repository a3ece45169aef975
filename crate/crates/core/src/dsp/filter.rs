use std::f64::consts::PI;

use num_complex::Complex64;

use super::{DspError, TimeSeries};

/// One second-order section, normalized so `a0 = 1`, run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn new(b0: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Self {
        Self { b0, b1, b2, a1, a2, s1: 0.0, s2: 0.0 }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0, 0.0)
    }

    #[inline]
    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.s1;
        self.s1 = self.b1 * x - self.a1 * y + self.s2;
        self.s2 = self.b2 * x - self.a2 * y;
        y
    }

    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// H(z) at `z = e^{jw}`.
    pub fn response_at(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + z1 * self.b1 + z2 * self.b2) / (1.0 + z1 * self.a1 + z2 * self.a2)
    }

    fn scale(&mut self, g: f64) {
        self.b0 *= g;
        self.b1 *= g;
        self.b2 *= g;
    }
}

/// Cascade of second-order sections designed for a fixed sampling rate.
///
/// The filter carries its own delay-line state; clone it per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    pub sections: Vec<Biquad>,
    pub fs: f64,
}

impl IirFilter {
    pub fn new(sections: Vec<Biquad>, fs: f64) -> Self {
        Self { sections, fs }
    }

    pub fn identity(fs: f64) -> Self {
        Self::new(vec![Biquad::identity()], fs)
    }

    pub fn reset(&mut self) {
        for s in &mut self.sections {
            s.s1 = 0.0;
            s.s2 = 0.0;
        }
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let w = 2.0 * PI * freq / self.fs;
        self.sections.iter().map(|s| s.response_at(w)).product()
    }

    pub fn gain_db(&self, freq: f64) -> f64 {
        20.0 * self.response(freq).norm().log10()
    }

    /// Filter in place, continuing from the current state.
    pub fn process(&mut self, samples: &mut [f64]) {
        for sec in &mut self.sections {
            for x in samples.iter_mut() {
                *x = sec.process(*x);
            }
        }
    }
}

/// Causal filtering of `ts`; `f` keeps its state afterwards.
pub fn filter_apply(f: &mut IirFilter, ts: &TimeSeries) -> Result<TimeSeries, DspError> {
    if (f.fs - ts.fs).abs() > 1e-9 * f.fs.max(1.0) {
        return Err(DspError::SampleRateMismatch { filter: f.fs, signal: ts.fs });
    }
    let mut samples = ts.samples.clone();
    f.process(&mut samples);
    Ok(TimeSeries { samples, fs: ts.fs })
}

/// Second-order notch at `f0` with quality factor `q`; unity gain at DC and Nyquist.
pub fn design_notch(fs: f64, f0: f64, q: f64) -> Result<IirFilter, DspError> {
    if !(fs > 0.0) || !(f0 > 0.0 && f0 < fs / 2.0) {
        return Err(DspError::FrequencyOutOfRange(format!(
            "notch at {f0} Hz needs 0 < f0 < {} Hz",
            fs / 2.0
        )));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(DspError::FrequencyOutOfRange(format!("quality factor {q}")));
    }
    let w0 = 2.0 * PI * f0 / fs;
    let alpha = w0.sin() / (2.0 * q);
    let c = w0.cos();
    let a0 = 1.0 + alpha;
    let sec = Biquad::new(1.0 / a0, -2.0 * c / a0, 1.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0);
    Ok(IirFilter::new(vec![sec], fs))
}

/// Butterworth bandpass of total order `order` (prototype order `order / 2`).
///
/// Analog lowpass prototype, lowpass-to-bandpass transform on pre-warped band
/// edges, then the bilinear transform. Every section gets one conjugate pole
/// pair and the zero pair `z = +1, -1`; the cascade is normalized to unit gain
/// at the band center.
pub fn design_butterworth_bandpass(fs: f64, lo: f64, hi: f64, order: usize) -> Result<IirFilter, DspError> {
    if !(fs > 0.0) || !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
        return Err(DspError::FrequencyOutOfRange(format!(
            "band {lo}-{hi} Hz needs 0 < lo < hi < {} Hz",
            fs / 2.0
        )));
    }
    if order < 2 || order % 2 != 0 {
        return Err(DspError::InvalidOrder(order));
    }
    let n = order / 2;
    let k = 2.0 * fs;
    let w1 = k * (PI * lo / fs).tan();
    let w2 = k * (PI * hi / fs).tan();
    let bw = w2 - w1;
    let w0sq = w1 * w2;

    let mut analog = Vec::with_capacity(2 * n);
    for i in 0..n {
        let theta = PI * (2 * i + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0sq).sqrt();
        analog.push((pb + disc) / 2.0);
        analog.push((pb - disc) / 2.0);
    }
    let mut poles: Vec<Complex64> = analog.iter().map(|&s| (k + s) / (k - s)).collect();

    // pair each upper-half-plane pole with its conjugate; real poles pair with each other
    poles.sort_by(|a, b| b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal));
    let mut pairs: Vec<(Complex64, Complex64)> = Vec::with_capacity(n);
    let mut reals: Vec<f64> = Vec::new();
    for p in &poles {
        if p.im > 1e-12 {
            pairs.push((*p, p.conj()));
        } else if p.im.abs() <= 1e-12 {
            reals.push(p.re);
        }
    }
    for r in reals.chunks(2) {
        let b = if r.len() == 2 { r[1] } else { 0.0 };
        pairs.push((Complex64::new(r[0], 0.0), Complex64::new(b, 0.0)));
    }

    let mut sections: Vec<Biquad> = pairs
        .iter()
        .map(|(p, q)| {
            let a1 = -(p + q).re;
            let a2 = (p * q).re;
            Biquad::new(1.0, 0.0, -1.0, a1, a2)
        })
        .collect();

    let mut filter = IirFilter::new(sections.clone(), fs);
    let center = 2.0 * (w0sq.sqrt() / k).atan() * fs / (2.0 * PI);
    let g = filter.response(center).norm();
    let per_section = g.powf(-1.0 / sections.len() as f64);
    for s in &mut sections {
        s.scale(per_section);
    }
    filter.sections = sections;
    Ok(filter)
}
