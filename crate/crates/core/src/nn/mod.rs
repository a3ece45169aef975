//! Minimal f64 tensor and layer core with hand-written backpropagation.
//!
//! Layers keep their parameters in [`Tensor`]s whose `grad` buffers collect
//! gradients across a batch. [`Network`] chains seven convolution layers
//! (each optionally followed by a squeeze-and-excitation block), one dense
//! layer and a softmax head.

mod activation;
mod conv;
mod dense;
mod init;
mod loss;
mod network;
mod se;
mod tensor;

pub use activation::{leaky_relu, relu, sigmoid, Activation, GateKind};
pub use conv::{conv_output_dim, ConvCache, ConvLayer};
pub use dense::{DenseCache, DenseLayer};
pub use init::{gram_deviation, orthogonal_from_rng, orthogonal_init, orthogonal_regularization};
pub use loss::{cross_entropy, softmax, softmax_cross_entropy_grad, LOG_EPS};
pub use network::{Network, NetworkConfig, Trace, CONV_LAYERS};
pub use se::{SeBlock, SeCache};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
}
