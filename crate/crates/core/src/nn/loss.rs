use super::NnError;

/// Guard inside the logarithm of the cross-entropy.
pub const LOG_EPS: f64 = 1e-12;

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

pub fn cross_entropy(p: &[f64], label: usize) -> Result<f64, NnError> {
    let pl = p
        .get(label)
        .ok_or(NnError::IndexOutOfRange { index: label, len: p.len() })?;
    Ok(-(pl + LOG_EPS).ln())
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to the logits `z`,
/// given `p = softmax(z)`.
pub fn softmax_cross_entropy_grad(p: &[f64], label: usize) -> Result<Vec<f64>, NnError> {
    let pl = *p
        .get(label)
        .ok_or(NnError::IndexOutOfRange { index: label, len: p.len() })?;
    let scale = pl / (pl + LOG_EPS);
    Ok(p
        .iter()
        .enumerate()
        .map(|(j, &pj)| scale * (pj - if j == label { 1.0 } else { 0.0 }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        for p in softmax(&[0.0; 5]) {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let p = softmax(&[3.0, 1003.0]);
        assert!(p[0] < 1e-300 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matches_extended_precision_reference() {
        // e^1, e^2, e^3 over their sum, evaluated to 20 digits
        let reference = [0.090_030_573_170_380_46, 0.244_728_471_054_797_6, 0.665_240_955_774_821_9];
        for (p, r) in softmax(&[1.0, 2.0, 3.0]).iter().zip(reference) {
            assert!((p - r).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_values() {
        assert!(cross_entropy(&[0.0, 1.0], 1).unwrap().abs() < 1e-11);
        assert!((cross_entropy(&[0.2; 5], 3).unwrap() - 5f64.ln()).abs() < 1e-10);
        assert!((5f64.ln() - 1.6094).abs() < 1e-4);
        assert_eq!(cross_entropy(&[0.2; 5], 7), Err(NnError::IndexOutOfRange { index: 7, len: 5 }));
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let z = [0.3, -1.2, 2.0, 0.0, 0.7];
        let g = softmax_cross_entropy_grad(&softmax(&z), 2).unwrap();
        for k in 0..5 {
            let h = 1e-6;
            let mut zp = z;
            zp[k] += h;
            let mut zm = z;
            zm[k] -= h;
            let fd = (cross_entropy(&softmax(&zp), 2).unwrap() - cross_entropy(&softmax(&zm), 2).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn sums_to_one_and_shift_invariant(z in prop::collection::vec(-50.0f64..50.0, 1..10), c in -100.0f64..100.0) {
            let p = softmax(&z);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0));
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
