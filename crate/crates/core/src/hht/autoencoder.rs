use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{HhtError, TimeFrequencyImage};
use crate::nn::{Activation, DenseLayer};
use crate::optim::{AdamState, Optimizer};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    /// `None` means one eighth of the image size.
    pub latent_dim: Option<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub leaky_alpha: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self { latent_dim: None, epochs: 20, batch_size: 16, lr: 5e-3, leaky_alpha: 0.1, seed: 0 }
    }
}

/// One hidden layer: Leaky ReLU encoder, linear decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub time_bins: usize,
    pub freq_bins: usize,
    pub encoder: DenseLayer,
    pub decoder: DenseLayer,
    /// Mean squared reconstruction error over the training set before
    /// training, then after each epoch.
    pub loss_history: Vec<f64>,
}

impl Autoencoder {
    pub fn latent_dim(&self) -> usize {
        self.encoder.outputs()
    }

    pub fn input_dim(&self) -> usize {
        self.time_bins * self.freq_bins
    }

    /// Grid the latent vector is laid out on.
    pub fn latent_shape(&self) -> (usize, usize) {
        reduced_shape(self.time_bins, self.freq_bins, self.latent_dim())
    }

    pub fn reconstruct(&self, img: &TimeFrequencyImage) -> Result<Vec<f64>, HhtError> {
        let z = encode(self, img)?;
        Ok(self.decoder.forward(&z)?.out)
    }

    fn mse(&self, x: &[f64]) -> Result<f64, HhtError> {
        let h = self.encoder.forward(x)?;
        let y = self.decoder.forward(&h.out)?;
        Ok(y.out.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
    }

    fn mean_loss(&self, images: &[&[f64]]) -> Result<f64, HhtError> {
        let mut total = 0.0;
        for x in images {
            total += self.mse(x)?;
        }
        Ok(total / images.len() as f64)
    }
}

/// Grid for a latent vector: `T/4 x F/2` when that matches, otherwise the
/// most nearly square factorisation.
pub fn reduced_shape(time_bins: usize, freq_bins: usize, latent: usize) -> (usize, usize) {
    if time_bins % 4 == 0 && freq_bins % 2 == 0 && (time_bins / 4) * (freq_bins / 2) == latent {
        return (time_bins / 4, freq_bins / 2);
    }
    let mut h = (latent as f64).sqrt() as usize;
    while h > 1 && latent % h != 0 {
        h -= 1;
    }
    let h = h.max(1);
    (h, latent / h)
}

pub fn train_autoencoder(images: &[TimeFrequencyImage], cfg: &AutoencoderConfig) -> Result<Autoencoder, HhtError> {
    let first = images.first().ok_or(HhtError::EmptyTrainingSet)?;
    let (t, f) = (first.time_bins, first.freq_bins);
    let input = t * f;
    let latent = cfg.latent_dim.unwrap_or(input / 8);
    if latent == 0 || latent >= input {
        return Err(HhtError::InvalidLatentDim { latent, input });
    }
    for img in images {
        if img.data.len() != input {
            return Err(HhtError::DimensionMismatch { expected: input, got: img.data.len() });
        }
    }
    let mut rng = seeded(cfg.seed);
    let encoder = DenseLayer::new(input, latent, Activation::LeakyRelu(cfg.leaky_alpha), &mut rng)?;
    let decoder = DenseLayer::new(latent, input, Activation::Identity, &mut rng)?;
    let mut ae = Autoencoder { time_bins: t, freq_bins: f, encoder, decoder, loss_history: Vec::new() };
    let data: Vec<&[f64]> = images.iter().map(|i| i.data.as_slice()).collect();
    ae.loss_history.push(ae.mean_loss(&data)?);

    let sizes = [input * latent, latent, latent * input, input];
    let mut opt = Optimizer::Adam(AdamState::new(&sizes, cfg.lr)?);
    let batch = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..images.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            for l in [&mut ae.encoder, &mut ae.decoder] {
                l.weight.zero_grad();
                l.bias.zero_grad();
            }
            for &i in chunk {
                let x = data[i];
                let h = ae.encoder.forward(x)?;
                let y = ae.decoder.forward(&h.out)?;
                let scale = 2.0 / input as f64;
                let dy: Vec<f64> = y.out.iter().zip(x).map(|(a, b)| scale * (a - b)).collect();
                let dh = ae.decoder.backward(&y, &dy)?;
                ae.encoder.backward(&h, &dh)?;
            }
            let Autoencoder { encoder, decoder, .. } = &mut ae;
            opt.step(
                vec![&mut encoder.weight, &mut encoder.bias, &mut decoder.weight, &mut decoder.bias],
                1.0 / chunk.len() as f64,
            )?;
        }
        let loss = ae.mean_loss(&data)?;
        log::debug!("autoencoder epoch loss {loss:.6e}");
        ae.loss_history.push(loss);
    }
    for t in [&mut ae.encoder.weight, &mut ae.encoder.bias, &mut ae.decoder.weight, &mut ae.decoder.bias] {
        t.grad = None;
    }
    Ok(ae)
}

/// Latent code of one image.
pub fn encode(ae: &Autoencoder, img: &TimeFrequencyImage) -> Result<Vec<f64>, HhtError> {
    if img.data.len() != ae.input_dim() || img.time_bins != ae.time_bins {
        return Err(HhtError::DimensionMismatch { expected: ae.input_dim(), got: img.data.len() });
    }
    Ok(ae.encoder.forward(&img.data)?.out)
}
