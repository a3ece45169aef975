use super::HhtError;

pub const DEFAULT_MAX_IMFS: usize = 6;
/// Cauchy-type stop threshold on the normalized squared change between sifts.
pub const DEFAULT_SIFT_TOL: f64 = 0.05;
pub const MAX_SIFTS: usize = 50;

/// Intrinsic mode function, same length as its source epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Imf {
    pub index: usize,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmdResult {
    pub imfs: Vec<Imf>,
    pub residue: Vec<f64>,
}

impl EmdResult {
    /// No oscillatory mode was found; the input is its own residue.
    pub fn is_degenerate(&self) -> bool {
        self.imfs.is_empty()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residue.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(&imf.samples) {
                *o += v;
            }
        }
        out
    }
}

fn extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if x[i] > x[i - 1] && x[i] >= x[i + 1] {
            maxima.push(i);
        } else if x[i] < x[i - 1] && x[i] <= x[i + 1] {
            minima.push(i);
        }
    }
    (maxima, minima)
}

/// Interior local maxima and minima counts.
pub fn count_extrema(x: &[f64]) -> (usize, usize) {
    let (a, b) = extrema(x);
    (a.len(), b.len())
}

/// Natural cubic spline through `(xs, ys)` evaluated at `0..n`.
fn natural_spline(xs: &[f64], ys: &[f64], n: usize) -> Vec<f64> {
    let m = xs.len();
    debug_assert!(m >= 2);
    // second derivatives by the Thomas algorithm; natural ends fix them to zero
    let mut second = vec![0.0; m];
    if m > 2 {
        let k = m - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 1..m - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        }
        for i in 1..k {
            let lower = xs[i + 1] - xs[i];
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        second[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for t in 0..n {
        let t = t as f64;
        while seg + 2 < m && t > xs[seg + 1] {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let v = a * ys[seg]
            + b * ys[seg + 1]
            + ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * h * h / 6.0;
        out.push(v);
    }
    out
}

/// Spline envelope through the given extrema, with the two outermost
/// extrema at each end mirrored about the signal endpoints.
fn envelope(x: &[f64], idx: &[usize]) -> Vec<f64> {
    let n = x.len();
    let last = (n - 1) as f64;
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(idx.len() + 4);
    for &i in idx.iter().take(2).rev() {
        knots.push((-(i as f64), x[i]));
    }
    knots.extend(idx.iter().map(|&i| (i as f64, x[i])));
    for &i in idx.iter().rev().take(2) {
        knots.push((2.0 * last - i as f64, x[i]));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
    natural_spline(&xs, &ys, n)
}

/// Sift one mode out of `r`. Returns `None` when `r` has no oscillation to sift.
fn sift(r: &[f64], tol: f64) -> Option<Vec<f64>> {
    let mut h = r.to_vec();
    for iter in 0..MAX_SIFTS {
        let (maxima, minima) = extrema(&h);
        if maxima.is_empty() || minima.is_empty() {
            return if iter == 0 { None } else { Some(h) };
        }
        let upper = envelope(&h, &maxima);
        let lower = envelope(&h, &minima);
        let mut diff = 0.0;
        let mut norm = 0.0;
        let mut mean_peak: f64 = 0.0;
        let mut h_peak: f64 = 0.0;
        for i in 0..h.len() {
            let mean = 0.5 * (upper[i] + lower[i]);
            norm += h[i] * h[i];
            diff += mean * mean;
            mean_peak = mean_peak.max(mean.abs());
            h_peak = h_peak.max(h[i].abs());
            h[i] -= mean;
        }
        if norm == 0.0 || diff / norm < tol || mean_peak <= 1e-12 * h_peak {
            break;
        }
    }
    Some(h)
}

/// Empirical mode decomposition.
///
/// Stops when the residue has no interior maximum or minimum left, becomes
/// negligible, or `max_imfs` modes were extracted. The residue is the input
/// minus all modes, so modes plus residue reproduce the input to rounding.
pub fn emd(epoch: &[f64], max_imfs: usize, sift_tol: f64) -> Result<EmdResult, HhtError> {
    if epoch.len() < 8 {
        return Err(HhtError::TooShort(epoch.len()));
    }
    if epoch.iter().any(|v| !v.is_finite()) {
        return Err(HhtError::NonFinite);
    }
    let scale = epoch.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut residue = epoch.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < max_imfs {
        let energy = residue.iter().map(|v| v * v).sum::<f64>().sqrt();
        if energy <= 1e-12 * scale {
            break;
        }
        let Some(mode) = sift(&residue, sift_tol) else {
            break;
        };
        for (r, m) in residue.iter_mut().zip(&mode) {
            *r -= m;
        }
        imfs.push(Imf { index: imfs.len(), samples: mode });
    }
    Ok(EmdResult { imfs, residue })
}
