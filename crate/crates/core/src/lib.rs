//! Sleep-stage classification from single-channel EEG.
//!
//! The crate covers the full chain from raw recordings to evaluated models:
//!
//! * [`edf_io`] reads and writes EDF recordings and hypnograms, and produces
//!   labeled synthetic EEG for desk-scale experiments.
//! * [`dsp`] resamples, notch- and band-filters, segments into 30 s epochs and
//!   balances classes by oversampling.
//! * [`hht`] turns each epoch into a time-frequency image via empirical mode
//!   decomposition and the Hilbert spectrum, with an optional autoencoder that
//!   shrinks the image.
//! * [`nn`] is a small f64 tensor/layer core: a 7-layer orthogonally
//!   initialized CNN with squeeze-and-excitation blocks, Leaky ReLU and full
//!   backpropagation.
//! * [`optim`] holds Adam and plain gradient descent.
//! * [`pipeline`] wires everything into training, k-fold / hold-out
//!   evaluation and metric reports.
//! * [`model_store`] persists networks, autoencoders and optimizer state.
//! * [`cli`] is the command-line front end.

pub mod cli;
pub mod dsp;
pub mod edf_io;
pub mod hht;
pub mod model_store;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod rng;

pub use edf_io::{Hypnogram, Recording, SleepStage};
