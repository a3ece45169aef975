use serde::{Deserialize, Serialize};

use super::{
    cross_entropy, orthogonal_regularization, softmax, softmax_cross_entropy_grad, Activation, ConvCache, ConvLayer,
    DenseCache, DenseLayer, GateKind, NnError, SeBlock, SeCache, Tensor,
};
use crate::rng::seeded;

pub const CONV_LAYERS: usize = 7;

/// Architecture descriptor. Everything needed to rebuild a network shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub kernel: usize,
    pub padding: usize,
    pub activation: Activation,
    pub se_enabled: bool,
    pub se_reduction: usize,
    pub gate: GateKind,
    pub num_classes: usize,
}

impl NetworkConfig {
    /// Leaky ReLU(0.1) everywhere with the clamped leaky gate.
    pub fn proposed(height: usize, width: usize) -> Self {
        Self {
            in_channels: 1,
            height,
            width,
            channels: vec![8, 16, 16, 32, 32, 64, 64],
            strides: vec![1, 1, 1, 1, 1, 2, 2],
            kernel: 3,
            padding: 1,
            activation: Activation::LeakyRelu(0.1),
            se_enabled: true,
            se_reduction: 4,
            gate: GateKind::ClampedLeaky(0.1),
            num_classes: 5,
        }
    }

    /// Sigmoid activations with the sigmoid gate.
    pub fn baseline(height: usize, width: usize) -> Self {
        Self { activation: Activation::Sigmoid, gate: GateKind::Sigmoid, ..Self::proposed(height, width) }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::InvalidConfig(m));
        if self.channels.len() != CONV_LAYERS || self.strides.len() != CONV_LAYERS {
            return bad(format!(
                "need {CONV_LAYERS} conv layers, got {} channel and {} stride entries",
                self.channels.len(),
                self.strides.len()
            ));
        }
        if self.in_channels == 0 || self.height == 0 || self.width == 0 {
            return bad("input dimensions must be positive".into());
        }
        if self.channels.contains(&0) || self.strides.contains(&0) || self.kernel == 0 {
            return bad("channels, strides and kernel must be positive".into());
        }
        if self.num_classes < 2 {
            return bad("need at least two classes".into());
        }
        if self.se_reduction == 0 {
            return bad("SE reduction ratio must be >= 1".into());
        }
        if let Activation::LeakyRelu(a) = self.activation {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("leaky slope {a} outside (0, 1)"));
            }
        }
        self.feature_shape().map(|_| ())
    }

    /// Shape `[c, h, w]` after the last conv layer.
    pub fn feature_shape(&self) -> Result<[usize; 3], NnError> {
        let (mut h, mut w) = (self.height, self.width);
        for &s in &self.strides {
            h = super::conv_output_dim(h, self.kernel, s, self.padding)
                .ok_or_else(|| NnError::InvalidConfig(format!("input {}x{} too small", self.height, self.width)))?;
            w = super::conv_output_dim(w, self.kernel, s, self.padding)
                .ok_or_else(|| NnError::InvalidConfig(format!("input {}x{} too small", self.height, self.width)))?;
        }
        Ok([*self.channels.last().unwrap_or(&0), h, w])
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.height * self.width
    }
}

/// Everything a forward pass produces that backpropagation needs.
#[derive(Debug, Clone)]
pub struct Trace {
    pub convs: Vec<ConvCache>,
    pub ses: Vec<Option<SeCache>>,
    pub head: DenseCache,
    pub probs: Vec<f64>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        &self.head.pre
    }
}

/// Seven conv layers (each optionally followed by an SE block), a dense head
/// and softmax.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: NetworkConfig,
    pub convs: Vec<ConvLayer>,
    pub ses: Vec<Option<SeBlock>>,
    pub head: DenseLayer,
    cache: Option<Trace>,
}

impl Network {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = seeded(seed);
        let mut convs = Vec::with_capacity(CONV_LAYERS);
        let mut ses = Vec::with_capacity(CONV_LAYERS);
        let mut in_ch = config.in_channels;
        for (&out_ch, &stride) in config.channels.iter().zip(&config.strides) {
            convs.push(ConvLayer::new(in_ch, out_ch, config.kernel, stride, config.padding, config.activation, &mut rng)?);
            ses.push(if config.se_enabled {
                Some(SeBlock::new(out_ch, config.se_reduction, config.activation, config.gate, &mut rng)?)
            } else {
                None
            });
            in_ch = out_ch;
        }
        let feat: usize = config.feature_shape()?.iter().product();
        let head = DenseLayer::new(feat, config.num_classes, Activation::Identity, &mut rng)?;
        Ok(Self { config, convs, ses, head, cache: None })
    }

    /// Parameters in canonical order: per layer conv weight, conv bias, then
    /// (if present) SE fc1 weight/bias and fc2 weight/bias; finally the head.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for (c, s) in self.convs.iter().zip(&self.ses) {
            out.push(&c.weight);
            out.push(&c.bias);
            if let Some(s) = s {
                out.extend([&s.fc1.weight, &s.fc1.bias, &s.fc2.weight, &s.fc2.bias]);
            }
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for (c, s) in self.convs.iter_mut().zip(self.ses.iter_mut()) {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
            if let Some(s) = s {
                out.extend([&mut s.fc1.weight, &mut s.fc1.bias, &mut s.fc2.weight, &mut s.fc2.bias]);
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Replaces every parameter value, in [`Network::params`] order.
    pub fn set_parameters(&mut self, values: &[Vec<f64>]) -> Result<(), NnError> {
        let mut params = self.params_mut();
        if values.len() != params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} parameter blobs for {} tensors",
                values.len(),
                params.len()
            )));
        }
        for (i, (t, v)) in params.iter_mut().zip(values).enumerate() {
            if t.len() != v.len() {
                return Err(NnError::ShapeMismatch(format!(
                    "parameter {i} expects {} values, got {}",
                    t.len(),
                    v.len()
                )));
            }
        }
        for (t, v) in params.into_iter().zip(values) {
            t.data.copy_from_slice(v);
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Tensor::zero_grad);
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace, NnError> {
        if x.len() != self.config.input_len() {
            return Err(NnError::ShapeMismatch(format!(
                "network expects {} input values ({}x{}x{}), got {}",
                self.config.input_len(),
                self.config.in_channels,
                self.config.height,
                self.config.width,
                x.len()
            )));
        }
        let mut shape = [self.config.in_channels, self.config.height, self.config.width];
        let mut convs = Vec::with_capacity(CONV_LAYERS);
        let mut ses = Vec::with_capacity(CONV_LAYERS);
        let mut current = x.to_vec();
        for (conv, se) in self.convs.iter().zip(&self.ses) {
            let c = conv.forward(&current, shape)?;
            shape = c.out_shape;
            current = c.out.clone();
            convs.push(c);
            match se {
                Some(se) => {
                    let s = se.forward(&current, shape)?;
                    current = s.out.clone();
                    ses.push(Some(s));
                }
                None => ses.push(None),
            }
        }
        let head = self.head.forward(&current)?;
        let probs = softmax(&head.pre);
        Ok(Trace { convs, ses, head, probs })
    }

    /// Class probabilities.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_trace(x)?.probs)
    }

    /// Accumulates parameter gradients from an upstream logit gradient; returns
    /// the gradient with respect to the input.
    pub fn backward_trace(&mut self, trace: &Trace, grad_logits: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut g = self.head.backward(&trace.head, grad_logits)?;
        for i in (0..self.convs.len()).rev() {
            if let (Some(se), Some(cache)) = (self.ses[i].as_mut(), trace.ses[i].as_ref()) {
                g = se.backward(cache, &g)?;
            }
            g = self.convs[i].backward(&trace.convs[i], &g)?;
        }
        Ok(g)
    }

    /// Forward pass keeping the trace for a later [`Network::backward`].
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let trace = self.forward_trace(x)?;
        let probs = trace.probs.clone();
        self.cache = Some(trace);
        Ok(probs)
    }

    pub fn backward(&mut self, grad_logits: &[f64]) -> Result<Vec<f64>, NnError> {
        let trace = self.cache.take().ok_or(NnError::NoForwardCache)?;
        let out = self.backward_trace(&trace, grad_logits);
        self.cache = Some(trace);
        out
    }

    /// Cross-entropy of one labelled sample, accumulating its gradients.
    pub fn accumulate_sample(&mut self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>), NnError> {
        let trace = self.forward_trace(x)?;
        let loss = cross_entropy(&trace.probs, label)?;
        let dz = softmax_cross_entropy_grad(&trace.probs, label)?;
        self.backward_trace(&trace, &dz)?;
        Ok((loss, trace.probs))
    }

    /// Adds the orthogonality penalty gradient of every conv weight
    /// (viewed as `[out, in*kh*kw]`) and returns the total penalty.
    pub fn apply_orthogonal_regularization(&mut self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for conv in &mut self.convs {
            let rows = conv.weight.shape[0];
            let cols = conv.weight.len() / rows;
            let (p, g) = orthogonal_regularization(&conv.weight.data, rows, cols, lambda);
            total += p;
            for (d, v) in conv.weight.grad_mut().iter_mut().zip(g) {
                *d += v;
            }
        }
        total
    }

    pub fn orthogonal_penalty(&self, lambda: f64) -> f64 {
        self.convs
            .iter()
            .map(|c| {
                let rows = c.weight.shape[0];
                orthogonal_regularization(&c.weight.data, rows, c.weight.len() / rows, lambda).0
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|t| t.is_finite())
    }
}
