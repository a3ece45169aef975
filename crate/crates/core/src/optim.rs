//! Parameter update rules: Adam with bias correction, and plain gradient descent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Tensor;

pub const DEFAULT_LR: f64 = 3e-5;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient in parameter {param} at index {index}")]
    NonFiniteGradient { param: usize, index: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
}

/// Adam moments for a list of parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zeroed moments for parameters of the given lengths and default betas.
    pub fn new(sizes: &[usize], lr: f64) -> Result<Self, OptimError> {
        Self::with_hyper(sizes, lr, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS)
    }

    pub fn with_hyper(sizes: &[usize], lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self, OptimError> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(OptimError::InvalidHyperparameter(format!("lr {lr}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(OptimError::InvalidHyperparameter(format!("betas ({beta1}, {beta2}) outside [0, 1)")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(OptimError::InvalidHyperparameter(format!("eps {eps}")));
        }
        Ok(Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
        })
    }

    pub fn for_tensors(tensors: &[&Tensor], lr: f64) -> Result<Self, OptimError> {
        Self::new(&tensors.iter().map(|t| t.len()).collect::<Vec<_>>(), lr)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }
}

fn check_shapes(sizes: &[usize], params: &[&mut [f64]], grads: &[&[f64]]) -> Result<(), OptimError> {
    if params.len() != grads.len() || params.len() != sizes.len() {
        return Err(OptimError::ShapeMismatch(format!(
            "{} parameters, {} gradients, state for {}",
            params.len(),
            grads.len(),
            sizes.len()
        )));
    }
    for (i, ((p, g), &n)) in params.iter().zip(grads).zip(sizes).enumerate() {
        if p.len() != n || g.len() != n {
            return Err(OptimError::ShapeMismatch(format!(
                "parameter {i}: {} values, {} gradients, state {n}",
                p.len(),
                g.len()
            )));
        }
    }
    for (param, g) in grads.iter().enumerate() {
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(OptimError::NonFiniteGradient { param, index });
        }
    }
    Ok(())
}

/// One Adam step. Nothing is modified when an error is returned.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<(), OptimError> {
    check_shapes(&state.sizes(), params, grads)?;
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

pub fn sgd_step(params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<(), OptimError> {
    let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
    check_shapes(&sizes, params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (w, d) in p.iter_mut().zip(g.iter()) {
            *w -= lr * d;
        }
    }
    Ok(())
}

/// Update rule selected for a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd { lr: f64 },
}

impl Optimizer {
    /// Applies one step using each tensor's accumulated gradient, scaled by
    /// `grad_scale` (e.g. `1 / batch_size`).
    pub fn step(&mut self, tensors: Vec<&mut Tensor>, grad_scale: f64) -> Result<(), OptimError> {
        let mut values = Vec::with_capacity(tensors.len());
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(tensors.len());
        for t in tensors {
            let (v, g) = t.split_mut();
            grads.push(g.iter().map(|x| x * grad_scale).collect());
            values.push(v);
        }
        let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        match self {
            Self::Adam(state) => adam_step(&mut values, &grad_refs, state),
            Self::Sgd { lr } => sgd_step(&mut values, &grad_refs, *lr),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Adam(_) => "adam",
            Self::Sgd { .. } => "sgd",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_step(w: &mut f64, g: f64, s: &mut AdamState) {
        let mut p = [*w];
        adam_step(&mut [&mut p[..]], &[&[g][..]], s).unwrap();
        *w = p[0];
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut s = AdamState::new(&[3], DEFAULT_LR).unwrap();
        let mut p = [1.0, -2.0, 0.5];
        adam_step(&mut [&mut p[..]], &[&[0.0; 3][..]], &mut s).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(s.m[0], vec![0.0; 3]);
        assert_eq!(s.v[0], vec![0.0; 3]);
    }

    #[test]
    fn first_step_is_lr() {
        let mut s = AdamState::new(&[1], DEFAULT_LR).unwrap();
        let mut w = 1.0;
        scalar_step(&mut w, 0.5, &mut s);
        let expected = 1.0 - DEFAULT_LR * 0.5 / (0.5 + DEFAULT_EPS);
        assert!((w - expected).abs() < 1e-18);
        assert!(((1.0 - w) - 3e-5).abs() / 3e-5 < 1e-3);
    }

    #[test]
    fn two_steps_match_recurrence() {
        let mut s = AdamState::new(&[1], 0.01).unwrap();
        let mut w = 0.0;
        scalar_step(&mut w, 1.0, &mut s);
        scalar_step(&mut w, 1.0, &mut s);
        // by hand: m = 0.1 then 0.19; v = 0.001 then 0.001999
        let (m1, v1) = (0.1, 0.001);
        let step1 = 0.01 * (m1 / 0.1) / ((v1 / 0.001f64).sqrt() + 1e-8);
        let (m2, v2) = (0.19, 0.001999);
        let step2 = 0.01 * (m2 / 0.19) / ((v2 / 0.001999f64).sqrt() + 1e-8);
        assert!((w + step1 + step2).abs() < 1e-15);
    }

    #[test]
    fn sgd_arithmetic_and_shapes() {
        let mut p = [2.0];
        sgd_step(&mut [&mut p[..]], &[&[1.0][..]], 0.1).unwrap();
        assert!((p[0] - 1.9).abs() < 1e-15);
        sgd_step(&mut [&mut p[..]], &[&[0.0][..]], 0.1).unwrap();
        assert!((p[0] - 1.9).abs() < 1e-15);
        let mut q = [1.0, 2.0];
        assert!(matches!(sgd_step(&mut [&mut q[..]], &[&[1.0][..]], 0.1), Err(OptimError::ShapeMismatch(_))));
    }

    #[test]
    fn rejects_non_finite_gradients_without_touching_state() {
        let mut s = AdamState::new(&[2], 1e-3).unwrap();
        let mut p = [1.0, 1.0];
        let err = adam_step(&mut [&mut p[..]], &[&[0.5, f64::NAN][..]], &mut s).unwrap_err();
        assert_eq!(err, OptimError::NonFiniteGradient { param: 0, index: 1 });
        assert_eq!(s.t, 0);
        assert_eq!(p, [1.0, 1.0]);
    }

    #[test]
    fn bad_hyperparameters() {
        assert!(AdamState::with_hyper(&[1], 1e-3, 1.0, 0.999, 1e-8).is_err());
        assert!(AdamState::new(&[1], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn first_step_magnitude_is_lr(g in prop_oneof![1e-3f64..1e3, -1e3f64..-1e-3]) {
            let mut s = AdamState::new(&[1], DEFAULT_LR).unwrap();
            let mut w = 0.0;
            scalar_step(&mut w, g, &mut s);
            prop_assert!((w.abs() - DEFAULT_LR).abs() / DEFAULT_LR < 1e-3);
            prop_assert_eq!(w.signum(), -g.signum());
        }

        #[test]
        fn second_moment_non_negative_and_sign_follows_gradient(gs in prop::collection::vec(0.01f64..5.0, 1..30), neg in any::<bool>()) {
            let mut s = AdamState::new(&[1], 1e-2).unwrap();
            let mut w = 0.0;
            for g in gs {
                let g = if neg { -g } else { g };
                let before = w;
                scalar_step(&mut w, g, &mut s);
                prop_assert!(s.v[0][0] >= 0.0);
                prop_assert_eq!((w - before).signum(), -g.signum());
            }
        }

        #[test]
        fn deterministic(g in -10.0f64..10.0, w0 in -10.0f64..10.0) {
            let mut a = AdamState::new(&[1], 1e-3).unwrap();
            let mut b = a.clone();
            let (mut wa, mut wb) = (w0, w0);
            scalar_step(&mut wa, g, &mut a);
            scalar_step(&mut wb, g, &mut b);
            prop_assert_eq!(wa.to_bits(), wb.to_bits());
            prop_assert_eq!(a, b);
        }
    }
}
