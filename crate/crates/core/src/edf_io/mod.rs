//! EDF recordings, hypnograms and synthetic sleep EEG.
//!
//! Only plain EDF is handled. EDF+ annotation channels are dropped on read.

mod edf;
mod hypnogram;
mod synth;

pub use edf::{parse_edf, write_edf, EdfHeader, Recording, SignalSpec, ANNOTATION_LABEL};
pub use hypnogram::{load_hypnogram, Hypnogram, SleepStage, EPOCH_SECONDS};
pub use synth::{epoch_seed, generate_synthetic_recording, stage_template, SynthSpec};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EdfError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected at least {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("signal {signal} sample {sample}: value {value} outside physical range")]
    RangeOverflow {
        signal: usize,
        sample: usize,
        value: f64,
    },
    #[error("field {field} cannot be written in {width} characters: {value}")]
    FieldOverflow {
        field: &'static str,
        width: usize,
        value: String,
    },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("unknown stage label {label:?} on line {line}")]
    UnknownLabel { line: usize, label: String },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}
