use rand_distr::{Distribution, StandardNormal};

use crate::rng::{seeded, Rng};

/// Thin Q factor (m x n, m >= n) of a row-major matrix via Householder reflections,
/// with columns flipped so that Q's diagonal is non-negative.
fn householder_q(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut r = a.to_vec();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let norm = (j..m).map(|i| r[i * n + j] * r[i * n + j]).sum::<f64>().sqrt();
        let mut v: Vec<f64> = (j..m).map(|i| r[i * n + j]).collect();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        for c in j..n {
            let dot: f64 = (j..m).map(|i| v[i - j] * r[i * n + c]).sum();
            for i in j..m {
                r[i * n + c] -= 2.0 * v[i - j] * dot;
            }
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity
    let mut q = vec![0.0; m * n];
    for j in 0..n {
        q[j * n + j] = 1.0;
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for c in 0..n {
            let dot: f64 = (j..m).map(|i| v[i - j] * q[i * n + c]).sum();
            for i in j..m {
                q[i * n + c] -= 2.0 * v[i - j] * dot;
            }
        }
    }
    for c in 0..n {
        if q[c * n + c] < 0.0 {
            for i in 0..m {
                q[i * n + c] = -q[i * n + c];
            }
        }
    }
    q
}

/// Random (semi-)orthogonal `rows x cols` matrix, row-major.
///
/// Rows are orthonormal when `rows <= cols`, columns otherwise.
pub fn orthogonal_from_rng(rows: usize, cols: usize, rng: &mut Rng) -> Vec<f64> {
    let (m, n) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let a: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(rng)).collect();
    let q = householder_q(&a, m, n);
    if rows >= cols {
        q
    } else {
        let mut t = vec![0.0; rows * cols];
        for i in 0..m {
            for j in 0..n {
                t[j * cols + i] = q[i * n + j];
            }
        }
        t
    }
}

pub fn orthogonal_init(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    orthogonal_from_rng(rows, cols, &mut seeded(seed))
}

/// Gram matrix on the smaller side minus identity: `W Wᵀ - I` for wide or
/// square `W`, `Wᵀ W - I` for tall `W`.
fn gram_minus_identity(w: &[f64], rows: usize, cols: usize) -> (Vec<f64>, usize) {
    if rows <= cols {
        let mut g = vec![0.0; rows * rows];
        for i in 0..rows {
            let ri = &w[i * cols..(i + 1) * cols];
            for j in i..rows {
                let rj = &w[j * cols..(j + 1) * cols];
                let d: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                g[i * rows + j] = d;
                g[j * rows + i] = d;
            }
            g[i * rows + i] -= 1.0;
        }
        (g, rows)
    } else {
        let mut g = vec![0.0; cols * cols];
        for r in 0..rows {
            let row = &w[r * cols..(r + 1) * cols];
            for i in 0..cols {
                let wi = row[i];
                for j in 0..cols {
                    g[i * cols + j] += wi * row[j];
                }
            }
        }
        for i in 0..cols {
            g[i * cols + i] -= 1.0;
        }
        (g, cols)
    }
}

/// Largest absolute entry of the smaller-side Gram matrix minus identity.
pub fn gram_deviation(w: &[f64], rows: usize, cols: usize) -> f64 {
    gram_minus_identity(w, rows, cols).0.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Soft orthogonality penalty `lambda * ||G - I||_F²` on the smaller-side Gram
/// matrix, and its gradient (`4 lambda (W Wᵀ - I) W` for wide `W`).
pub fn orthogonal_regularization(w: &[f64], rows: usize, cols: usize, lambda: f64) -> (f64, Vec<f64>) {
    if lambda == 0.0 {
        return (0.0, vec![0.0; w.len()]);
    }
    let (g, k) = gram_minus_identity(w, rows, cols);
    let penalty = lambda * g.iter().map(|v| v * v).sum::<f64>();
    let mut grad = vec![0.0; w.len()];
    if rows <= cols {
        // (G W)[i, c] = sum_j G[i, j] W[j, c]
        for i in 0..rows {
            for j in 0..rows {
                let gij = 4.0 * lambda * g[i * k + j];
                if gij == 0.0 {
                    continue;
                }
                let src = &w[j * cols..(j + 1) * cols];
                for (o, s) in grad[i * cols..(i + 1) * cols].iter_mut().zip(src) {
                    *o += gij * s;
                }
            }
        }
    } else {
        // (W G)[r, c] = sum_j W[r, j] G[j, c]
        for r in 0..rows {
            for j in 0..cols {
                let wrj = 4.0 * lambda * w[r * cols + j];
                for c in 0..cols {
                    grad[r * cols + c] += wrj * g[j * k + c];
                }
            }
        }
    }
    (penalty, grad)
}
