use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, MetricsReport, PipelineError};
use crate::dsp::oversample_indices;
use crate::edf_io::SleepStage;
use crate::nn::{Activation, GateKind, Network, NetworkConfig};
use crate::optim::{self, AdamState, Optimizer};
use crate::rng::{seeded, sub_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerChoice {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    Sgd { lr: f64 },
}

impl OptimizerChoice {
    pub fn adam(lr: f64) -> Self {
        Self::Adam { lr, beta1: optim::DEFAULT_BETA1, beta2: optim::DEFAULT_BETA2, eps: optim::DEFAULT_EPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerChoice,
    pub activation: Activation,
    pub gate: GateKind,
    pub ortho_lambda: f64,
    pub seed: u64,
    pub se_enabled: bool,
    pub se_reduction: usize,
    /// Balance classes of the training items by oversampling.
    pub oversample: bool,
}

pub const DEFAULT_EPOCHS: usize = 30;
pub const DEFAULT_BATCH: usize = 16;
pub const DEFAULT_ORTHO_LAMBDA: f64 = 1e-4;
pub const DEFAULT_SGD_LR: f64 = 0.05;

impl TrainConfig {
    /// Leaky ReLU(0.1), Adam and the clamped leaky gate.
    pub fn proposed(seed: u64) -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            optimizer: OptimizerChoice::adam(optim::DEFAULT_LR),
            activation: Activation::LeakyRelu(0.1),
            gate: GateKind::ClampedLeaky(0.1),
            ortho_lambda: DEFAULT_ORTHO_LAMBDA,
            seed,
            se_enabled: true,
            se_reduction: 4,
            oversample: true,
        }
    }

    /// Sigmoid, plain gradient descent and the sigmoid gate.
    pub fn baseline(seed: u64) -> Self {
        Self {
            optimizer: OptimizerChoice::Sgd { lr: DEFAULT_SGD_LR },
            activation: Activation::Sigmoid,
            gate: GateKind::Sigmoid,
            ..Self::proposed(seed)
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.activation = Activation::LeakyRelu(alpha);
        if let GateKind::ClampedLeaky(_) = self.gate {
            self.gate = GateKind::ClampedLeaky(alpha);
        }
        self
    }

    pub fn network_config(&self, height: usize, width: usize) -> NetworkConfig {
        NetworkConfig {
            activation: self.activation,
            gate: self.gate,
            se_enabled: self.se_enabled,
            se_reduction: self.se_reduction,
            ..NetworkConfig::proposed(height, width)
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.ortho_lambda >= 0.0 && self.ortho_lambda.is_finite()) {
            return bad(format!("orthogonal penalty weight {}", self.ortho_lambda));
        }
        let lr = match self.optimizer {
            OptimizerChoice::Adam { lr, .. } | OptimizerChoice::Sgd { lr } => lr,
        };
        if !(lr > 0.0 && lr.is_finite()) {
            return bad(format!("learning rate {lr}"));
        }
        if let Activation::LeakyRelu(a) = self.activation {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("leaky slope {a} outside (0, 1)"));
            }
        }
        Ok(())
    }

    fn make_optimizer(&self, net: &Network) -> Result<Optimizer, PipelineError> {
        Ok(match self.optimizer {
            OptimizerChoice::Adam { lr, beta1, beta2, eps } => {
                let sizes: Vec<usize> = net.params().iter().map(|t| t.len()).collect();
                Optimizer::Adam(AdamState::with_hyper(&sizes, lr, beta1, beta2, eps)?)
            }
            OptimizerChoice::Sgd { lr } => Optimizer::Sgd { lr },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's samples plus the orthogonal penalty.
    pub loss: f64,
    /// Running training accuracy in percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub optimizer: Optimizer,
    pub history: Vec<EpochRecord>,
    pub elapsed_s: f64,
}

impl TrainOutcome {
    pub fn adam_state(&self) -> Option<&AdamState> {
        match &self.optimizer {
            Optimizer::Adam(s) => Some(s),
            Optimizer::Sgd { .. } => None,
        }
    }
}

/// Index of the largest probability; ties go to the earlier class.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Mini-batch training on every item of a labeled dataset.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, PipelineError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let labels = dataset.labels()?;
    let start = Instant::now();
    let mut net = Network::new(cfg.network_config(dataset.height, dataset.width), sub_seed(cfg.seed, 0))?;
    let mut opt = cfg.make_optimizer(&net)?;
    let mut order: Vec<usize> = if cfg.oversample {
        oversample_indices(labels, sub_seed(cfg.seed, 2))
    } else {
        (0..dataset.len()).collect()
    };
    let mut rng = seeded(sub_seed(cfg.seed, 1));
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut penalty = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            net.zero_grad();
            for &i in batch {
                let label = labels[i].index();
                let (loss, probs) = net.accumulate_sample(&dataset.images[i], label)?;
                loss_sum += loss;
                correct += usize::from(argmax(&probs) == label);
            }
            let scale = 1.0 / batch.len() as f64;
            for t in net.params_mut() {
                t.grad_mut().iter_mut().for_each(|g| *g *= scale);
            }
            penalty = net.apply_orthogonal_regularization(cfg.ortho_lambda);
            opt.step(net.params_mut(), 1.0)?;
        }
        let loss = loss_sum / order.len() as f64 + penalty;
        if !loss.is_finite() || !net.is_finite() {
            return Err(PipelineError::NonFiniteLoss { epoch });
        }
        let accuracy = 100.0 * correct as f64 / order.len() as f64;
        log::info!("epoch {:>3}  loss {loss:.5}  train acc {accuracy:.2}%", epoch + 1);
        history.push(EpochRecord { epoch: epoch + 1, loss, accuracy });
    }
    Ok(TrainOutcome { network: net, optimizer: opt, history, elapsed_s: start.elapsed().as_secs_f64() })
}

/// Most likely stage and class probabilities for every item.
pub fn predict(net: &Network, dataset: &Dataset) -> Result<Vec<(SleepStage, Vec<f64>)>, PipelineError> {
    check_dims(net, dataset)?;
    dataset
        .images
        .iter()
        .map(|img| {
            let p = net.predict(img)?;
            let stage = SleepStage::from_index(argmax(&p)).expect("five-class head");
            Ok((stage, p))
        })
        .collect()
}

pub fn evaluate(net: &Network, dataset: &Dataset) -> Result<MetricsReport, PipelineError> {
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let labels = dataset.labels()?;
    let preds: Vec<SleepStage> = predict(net, dataset)?.into_iter().map(|(s, _)| s).collect();
    MetricsReport::from_predictions(labels, &preds)
}

pub fn check_dims(net: &Network, dataset: &Dataset) -> Result<(), PipelineError> {
    let c = &net.config;
    if c.height != dataset.height || c.width != dataset.width {
        return Err(PipelineError::DimensionMismatch(format!(
            "model expects {}x{} images but the dataset holds {}x{} images{}",
            c.height,
            c.width,
            dataset.height,
            dataset.width,
            if dataset.height * dataset.width > c.height * c.width {
                " (was the cache built without the autoencoder?)"
            } else {
                ""
            }
        )));
    }
    Ok(())
}
