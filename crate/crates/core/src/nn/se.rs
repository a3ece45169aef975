use super::{Activation, DenseCache, DenseLayer, GateKind, NnError};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct SeCache {
    pub input: Vec<f64>,
    pub shape: [usize; 3],
    pub fc1: DenseCache,
    pub fc2: DenseCache,
    pub gate: Vec<f64>,
    pub out: Vec<f64>,
}

/// Squeeze-and-excitation: per-channel gates computed from global means.
#[derive(Debug, Clone, PartialEq)]
pub struct SeBlock {
    pub fc1: DenseLayer,
    /// Linear; the gate nonlinearity is applied separately.
    pub fc2: DenseLayer,
    pub gate: GateKind,
    pub reduction: usize,
}

impl SeBlock {
    pub fn new(channels: usize, reduction: usize, activation: Activation, gate: GateKind, rng: &mut Rng) -> Result<Self, NnError> {
        if reduction == 0 {
            return Err(NnError::InvalidConfig("SE reduction ratio must be >= 1".into()));
        }
        let hidden = (channels / reduction).max(1);
        let fc1 = DenseLayer::new(channels, hidden, activation, rng)?;
        let mut fc2 = DenseLayer::new(hidden, channels, Activation::Identity, rng)?;
        fc2.bias.data.iter_mut().for_each(|b| *b = gate.neutral_bias());
        Ok(Self { fc1, fc2, gate, reduction })
    }

    pub fn channels(&self) -> usize {
        self.fc1.inputs()
    }

    pub fn forward(&self, x: &[f64], shape: [usize; 3]) -> Result<SeCache, NnError> {
        let [c, h, w] = shape;
        if c != self.channels() || x.len() != c * h * w || h * w == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "SE block over {} channels got shape {shape:?} with {} values",
                self.channels(),
                x.len()
            )));
        }
        let hw = h * w;
        let squeezed: Vec<f64> = x.chunks_exact(hw).map(|p| p.iter().sum::<f64>() / hw as f64).collect();
        let fc1 = self.fc1.forward(&squeezed)?;
        let fc2 = self.fc2.forward(&fc1.out)?;
        let gate: Vec<f64> = fc2.pre.iter().map(|&z| self.gate.apply(z)).collect();
        let out = x
            .chunks_exact(hw)
            .zip(&gate)
            .flat_map(|(p, &g)| p.iter().map(move |v| v * g))
            .collect();
        Ok(SeCache { input: x.to_vec(), shape, fc1, fc2, gate, out })
    }

    pub fn backward(&mut self, cache: &SeCache, d_out: &[f64]) -> Result<Vec<f64>, NnError> {
        let [_, h, w] = cache.shape;
        let hw = h * w;
        if d_out.len() != cache.input.len() {
            return Err(NnError::ShapeMismatch(format!(
                "SE upstream gradient has {} values, expected {}",
                d_out.len(),
                cache.input.len()
            )));
        }
        let dz: Vec<f64> = d_out
            .chunks_exact(hw)
            .zip(cache.input.chunks_exact(hw))
            .zip(&cache.fc2.pre)
            .map(|((g, x), &z)| g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * self.gate.derivative(z))
            .collect();
        let dh = self.fc2.backward(&cache.fc2, &dz)?;
        let ds = self.fc1.backward(&cache.fc1, &dh)?;
        let mut dx = Vec::with_capacity(d_out.len());
        for ((g, &gate), &dsc) in d_out.chunks_exact(hw).zip(&cache.gate).zip(&ds) {
            let spread = dsc / hw as f64;
            dx.extend(g.iter().map(|v| v * gate + spread));
        }
        Ok(dx)
    }
}
