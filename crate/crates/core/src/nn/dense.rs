use super::{Activation, NnError, Tensor};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

/// Fully connected layer `y = act(W x + b)`, weights `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Result<Self, NnError> {
        if inputs == 0 || outputs == 0 {
            return Err(NnError::InvalidConfig(format!("dense {inputs} -> {outputs}")));
        }
        let w = super::orthogonal_from_rng(outputs, inputs, rng);
        Ok(Self {
            weight: Tensor::from_vec(&[outputs, inputs], w)?,
            bias: Tensor::zeros(&[outputs]),
            activation,
        })
    }

    pub fn from_parts(weight: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self, NnError> {
        let outputs = bias.len();
        if outputs == 0 || weight.len() % outputs != 0 || weight.is_empty() {
            return Err(NnError::ShapeMismatch(format!(
                "{} weights do not fit {outputs} outputs",
                weight.len()
            )));
        }
        let inputs = weight.len() / outputs;
        Ok(Self {
            weight: Tensor::from_vec(&[outputs, inputs], weight)?,
            bias: Tensor::from_vec(&[outputs], bias)?,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseCache, NnError> {
        let n = self.inputs();
        if x.len() != n {
            return Err(NnError::ShapeMismatch(format!("dense expects {n} inputs, got {}", x.len())));
        }
        let pre: Vec<f64> = self
            .weight
            .data
            .chunks_exact(n)
            .zip(&self.bias.data)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let out = pre.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(DenseCache { input: x.to_vec(), pre, out })
    }

    /// Accumulates parameter gradients and returns the gradient for the input.
    pub fn backward(&mut self, cache: &DenseCache, d_out: &[f64]) -> Result<Vec<f64>, NnError> {
        if d_out.len() != self.outputs() {
            return Err(NnError::ShapeMismatch(format!(
                "dense upstream gradient has {} values, expected {}",
                d_out.len(),
                self.outputs()
            )));
        }
        let n = self.inputs();
        let dz: Vec<f64> = d_out
            .iter()
            .zip(&cache.pre)
            .map(|(g, &z)| g * self.activation.derivative(z))
            .collect();
        for (b, d) in self.bias.grad_mut().iter_mut().zip(&dz) {
            *b += d;
        }
        let mut dx = vec![0.0; n];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &self.weight.data[r * n..(r + 1) * n];
            for (o, w) in dx.iter_mut().zip(row) {
                *o += w * d;
            }
        }
        let dw = self.weight.grad_mut();
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (o, xv) in dw[r * n..(r + 1) * n].iter_mut().zip(&cache.input) {
                *o += d * xv;
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_set_two_by_two() {
        // y = W x + b, L = sum(y * u) with u the upstream gradient
        let mut l = DenseLayer::from_parts(vec![1.0, 2.0, 3.0, 4.0], vec![0.5, -0.5], Activation::Identity).unwrap();
        let c = l.forward(&[1.0, -1.0]).unwrap();
        assert_eq!(c.out, vec![-0.5, -1.5]);
        let dx = l.backward(&c, &[1.0, 2.0]).unwrap();
        assert_eq!(dx, vec![7.0, 10.0]);
        assert_eq!(l.weight.grad.as_deref(), Some(&[1.0, -1.0, 2.0, -2.0][..]));
        assert_eq!(l.bias.grad.as_deref(), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = crate::rng::seeded(4);
        let mut l = DenseLayer::new(6, 3, Activation::Sigmoid, &mut rng).unwrap();
        let c = l.forward(&[0.3; 6]).unwrap();
        let dx = l.backward(&c, &[0.0; 3]).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert!(l.weight.grad.as_ref().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_length_checked() {
        let mut rng = crate::rng::seeded(4);
        let l = DenseLayer::new(6, 3, Activation::Relu, &mut rng).unwrap();
        assert!(matches!(l.forward(&[0.0; 5]), Err(NnError::ShapeMismatch(_))));
    }
}
