//! Command-line front end: `synth`, `preprocess`, `train`, `eval`, `kfold`
//! and `classify`.
//!
//! Every option can also come from a `key = value` file passed with
//! `--config`; keys are the long flag names and flags given on the command
//! line win. Outputs go to `--out-dir` and are never replaced without
//! `--force`. Wall-clock figures are left out of every output unless
//! `--timing` is set, so reruns produce byte-identical files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::edf_io::{generate_synthetic_recording, load_hypnogram, parse_edf, write_edf, EdfError, SynthSpec};
use crate::hht::AutoencoderConfig;
use crate::model_store::{self, StoreError};
use crate::nn::Activation;
use crate::optim;
use crate::pipeline::{
    self, finish_dataset, preprocess_recording, recording_images, run_experiment, Dataset, EpochRecord,
    ExperimentReport, MetricsReport, OptimizerChoice, PipelineError, PreprocessConfig, SplitMode, TrainConfig,
};
use crate::SleepStage;

/// Slopes tried by `train --alpha-sweep`.
pub const ALPHA_SWEEP: [f64; 3] = [0.1, 0.2, 0.3];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("{path} already exists (pass --force to overwrite)")]
    OutputExists { path: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Edf {
        context: String,
        #[source]
        source: EdfError,
    },
    #[error("{context}: {source}")]
    Pipeline {
        context: String,
        #[source]
        source: PipelineError,
    },
    #[error("{context}: {source}")]
    Store {
        context: String,
        #[source]
        source: StoreError,
    },
}

impl CliError {
    /// Stable name printed as `error[Kind]`.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::OutputExists { .. } => "OutputExists",
            CliError::Io { .. } => "IoError",
            CliError::Edf { source, .. } => match source {
                EdfError::InvalidSpec(_) => "InvalidSpec",
                EdfError::UnknownLabel { .. } => "UnknownLabel",
                _ => "EdfError",
            },
            CliError::Pipeline { source, .. } => match source {
                PipelineError::DimensionMismatch(_) => "DimensionMismatch",
                PipelineError::TooFewItems { .. } => "TooFewItems",
                PipelineError::MissingLabels => "MissingLabels",
                PipelineError::EmptyDataset => "EmptyDataset",
                PipelineError::InvalidConfig(_) => "InvalidConfig",
                PipelineError::BadCache(_) => "BadCache",
                PipelineError::NonFiniteLoss { .. } => "NonFiniteLoss",
                PipelineError::Edf(_) => "EdfError",
                PipelineError::Dsp(_) => "DspError",
                PipelineError::Hht(_) => "HhtError",
                _ => "PipelineError",
            },
            CliError::Store { source, .. } => match source {
                StoreError::BadMagic { .. } => "BadMagic",
                StoreError::ChecksumMismatch { .. } => "ChecksumMismatch",
                StoreError::VersionUnsupported(_) => "VersionUnsupported",
                StoreError::ShapeMismatch(_) => "ShapeMismatch",
                StoreError::Malformed(_) => "MalformedFile",
                StoreError::Io { .. } => "IoError",
            },
        }
    }
}

fn ctx_pipe(context: impl Into<String>) -> impl FnOnce(PipelineError) -> CliError {
    let context = context.into();
    move |source| CliError::Pipeline { context, source }
}

fn ctx_store(context: impl Into<String>) -> impl FnOnce(StoreError) -> CliError {
    let context = context.into();
    move |source| CliError::Store { context, source }
}

// ---- argument model ----

#[derive(Debug, Parser)]
#[command(name = "essc", version, about = "Sleep-stage classification from single-channel EEG")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Directory receiving all outputs; created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    /// Include wall-clock timings in reports (makes outputs run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
    /// Also write gnuplot-ready TSV files.
    #[arg(long, global = true)]
    pub emit_plot_data: bool,
    /// `key = value` file with default options; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a labeled synthetic EDF recording and its hypnogram.
    Synth(SynthArgs),
    /// Filter, epoch and image a recording into a dataset cache.
    Preprocess(PreprocessArgs),
    /// Train a network on every item of a labeled cache.
    Train(TrainArgs),
    /// Score a saved model on a labeled cache.
    Eval(EvalArgs),
    /// Cross-validate (or hold out) on a labeled cache.
    Kfold(KfoldArgs),
    /// Predict a stage for every epoch of a cache.
    Classify(ClassifyArgs),
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Comma-separated stages (W, S1, S2, SWS, REM).
    #[arg(long, default_value = "W,S1,S2,SWS,REM")]
    pub stages: String,
    #[arg(long, default_value_t = 8)]
    pub epochs_per_stage: usize,
    /// Sampling rate in Hz (at least 64).
    #[arg(long, default_value_t = 128.0)]
    pub fs: f64,
    /// Standard deviation of additive white noise in microvolts.
    #[arg(long, default_value_t = 2.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    /// Base name of `<name>.edf` and `<name>.hyp`.
    #[arg(long, default_value = "synthetic")]
    pub name: String,
}

#[derive(Debug, clap::Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub edf: PathBuf,
    /// Stage per 30 s epoch; without it the cache is unlabeled.
    #[arg(long)]
    pub hypnogram: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Mains frequency to notch (applied only above 100 Hz sampling).
    #[arg(long, default_value_t = 50.0)]
    pub notch: f64,
    #[arg(long)]
    pub no_notch: bool,
    #[arg(long, default_value_t = 0.5)]
    pub band_lo: f64,
    #[arg(long, default_value_t = 30.0)]
    pub band_hi: f64,
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Keep full-resolution time-frequency images.
    #[arg(long)]
    pub no_autoencoder: bool,
    /// Reuse a saved autoencoder instead of training one.
    #[arg(long, conflicts_with = "no_autoencoder")]
    pub autoencoder: Option<PathBuf>,
    /// Latent size (default: one eighth of the image).
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub ae_epochs: usize,
    /// Base name of `<name>.ds` (and `<name>.ae`).
    #[arg(long, default_value = "dataset")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Leaky ReLU + Adam + clamped leaky gate.
    Proposed,
    /// Sigmoid + plain gradient descent + sigmoid gate.
    Baseline,
}

#[derive(Debug, Clone, clap::Args)]
pub struct TrainOpts {
    #[arg(long, value_enum, default_value_t = Mode::Proposed)]
    pub mode: Mode,
    #[arg(long, default_value_t = pipeline::DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_BATCH)]
    pub batch: usize,
    /// Learning rate [default: 3e-5 for Adam, 0.05 for gradient descent].
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = optim::DEFAULT_BETA1)]
    pub beta1: f64,
    #[arg(long, default_value_t = optim::DEFAULT_BETA2)]
    pub beta2: f64,
    /// Leaky ReLU negative slope (proposed mode).
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = pipeline::DEFAULT_ORTHO_LAMBDA)]
    pub ortho_lambda: f64,
    /// Drop the squeeze-and-excitation blocks.
    #[arg(long)]
    pub no_se: bool,
    #[arg(long, default_value_t = 4)]
    pub se_reduction: usize,
    /// Train on the items as given, without class balancing.
    #[arg(long)]
    pub no_oversample: bool,
}

impl TrainOpts {
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, CliError> {
        let mut cfg = match self.mode {
            Mode::Proposed => TrainConfig::proposed(seed).with_alpha(self.alpha),
            Mode::Baseline => TrainConfig::baseline(seed),
        };
        cfg.optimizer = match self.mode {
            Mode::Proposed => OptimizerChoice::Adam {
                lr: self.lr.unwrap_or(optim::DEFAULT_LR),
                beta1: self.beta1,
                beta2: self.beta2,
                eps: optim::DEFAULT_EPS,
            },
            Mode::Baseline => OptimizerChoice::Sgd { lr: self.lr.unwrap_or(pipeline::DEFAULT_SGD_LR) },
        };
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch;
        cfg.ortho_lambda = self.ortho_lambda;
        cfg.se_enabled = !self.no_se;
        cfg.se_reduction = self.se_reduction;
        cfg.oversample = !self.no_oversample;
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CliError::InvalidConfig(format!("betas ({}, {}) outside [0, 1)", self.beta1, self.beta2)));
        }
        if self.se_reduction == 0 {
            return Err(CliError::InvalidConfig("se-reduction must be at least 1".into()));
        }
        cfg.validate().map_err(ctx_pipe("training options"))?;
        Ok(cfg)
    }
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cache: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Train once per slope in 0.1, 0.2, 0.3 (proposed mode only).
    #[arg(long)]
    pub alpha_sweep: bool,
    /// Base name of `<name>.model` and `<name>_history.csv`.
    #[arg(long, default_value = "model")]
    pub name: String,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    /// Base name of `<name>.json` and `<name>.csv`.
    #[arg(long, default_value = "metrics")]
    pub name: String,
}

#[derive(Debug, clap::Args)]
pub struct KfoldArgs {
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long, default_value_t = pipeline::DEFAULT_FOLDS)]
    pub k: usize,
    /// Single hold-out split instead of k folds.
    #[arg(long)]
    pub holdout: bool,
    #[arg(long, default_value_t = pipeline::DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    /// Folds trained in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub opts: TrainOpts,
    /// Base name of `<name>.json` and `<name>.csv`.
    #[arg(long, default_value = "kfold")]
    pub name: String,
}

#[derive(Debug, clap::Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    /// Base name of `<name>.csv`.
    #[arg(long, default_value = "predictions")]
    pub name: String,
}

// ---- config file ----

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::InvalidConfig(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CliError::InvalidConfig(format!("config line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::InvalidConfig(format!("config line {}: duplicate key {key}", n + 1)));
        }
    }
    Ok(out)
}

/// Arguments the config file adds: every key must name a long flag of the
/// chosen command, and keys already given on the command line are skipped.
fn config_args(
    matches: &clap::ArgMatches,
    entries: &BTreeMap<String, String>,
) -> Result<Vec<OsString>, CliError> {
    let (sub_name, sub_matches) = matches.subcommand().ok_or_else(|| CliError::Usage("no command given".into()))?;
    let root = Cli::command();
    let sub = root.find_subcommand(sub_name).expect("matched subcommand exists");
    let mut extra = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| CliError::InvalidConfig(format!("unknown config key {key:?} for `{sub_name}`")))?;
        if key == "config" {
            return Err(CliError::InvalidConfig("config files cannot include other config files".into()));
        }
        let id = arg.get_id().as_str();
        if sub_matches.value_source(id) == Some(clap::parser::ValueSource::CommandLine) {
            continue;
        }
        let is_flag = matches!(arg.get_action(), ArgAction::SetTrue | ArgAction::Count);
        if is_flag {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => extra.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                _ => return Err(CliError::InvalidConfig(format!("config key {key}: expected true or false, got {value:?}"))),
            }
        } else {
            extra.push(format!("--{key}").into());
            extra.push(value.into());
        }
    }
    Ok(extra)
}

fn usage_error(e: clap::Error) -> CliError {
    let text = e.render().to_string();
    let text = text.trim_start_matches("error: ").trim_end().to_string();
    CliError::Usage(text)
}

/// Resolves the full argument list, config file included.
pub fn parse_args(args: Vec<OsString>) -> Result<Cli, Result<clap::Error, CliError>> {
    let cmd = Cli::command();
    let matches = cmd.clone().try_get_matches_from(args.clone()).map_err(Ok)?;
    let Some(path) = matches.get_one::<PathBuf>("config") else {
        return Cli::from_arg_matches(&matches).map_err(Ok);
    };
    let text = fs::read_to_string(path)
        .map_err(|source| Err(CliError::Io { path: path.display().to_string(), source }))?;
    let entries = parse_config_file(&text).map_err(Err)?;
    let mut full = args;
    full.extend(config_args(&matches, &entries).map_err(Err)?);
    let matches = cmd.try_get_matches_from(full).map_err(|e| Err(usage_error(e)))?;
    Cli::from_arg_matches(&matches).map_err(Ok)
}

// ---- output handling ----

/// Every file a command writes; checked up front so nothing runs when an
/// output would be clobbered.
struct Outputs {
    dir: PathBuf,
    force: bool,
}

impl Outputs {
    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn claim(&self, files: &[String]) -> Result<(), CliError> {
        if !self.force {
            for f in files {
                let p = self.path(f);
                if p.exists() {
                    return Err(CliError::OutputExists { path: p.display().to_string() });
                }
            }
        }
        fs::create_dir_all(&self.dir)
            .map_err(|source| CliError::Io { path: self.dir.display().to_string(), source })
    }

    fn write(&self, file: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let p = self.path(file);
        model_store::write_file(&p, bytes, self.force).map_err(ctx_store(format!("writing {}", p.display())))?;
        Ok(p)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn load_cache(path: &Path) -> Result<Dataset, CliError> {
    Dataset::from_bytes(&read(path)?).map_err(ctx_pipe(format!("reading {}", path.display())))
}

fn load_model(path: &Path) -> Result<crate::nn::Network, CliError> {
    let (net, _) = model_store::load(&read(path)?).map_err(ctx_store(format!("reading {}", path.display())))?;
    Ok(net)
}

fn check_name(name: &str) -> Result<(), CliError> {
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(CliError::InvalidConfig(format!("output name {name:?} must be a plain file name")));
    }
    Ok(())
}

fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,loss,accuracy\n");
    for r in history {
        let _ = writeln!(s, "{},{},{}", r.epoch, r.loss, r.accuracy);
    }
    s
}

fn history_tsv(history: &[EpochRecord]) -> String {
    let mut s = String::from("# epoch\tloss\taccuracy_percent\n");
    for r in history {
        let _ = writeln!(s, "{}\t{}\t{}", r.epoch, r.loss, r.accuracy);
    }
    s
}

fn metrics_csv(m: &MetricsReport) -> String {
    let mut s = String::from("stage,accuracy,tp,tn,fp,fn\n");
    for st in SleepStage::ALL {
        let b = m.binary(st.index());
        let _ = writeln!(s, "{},{},{},{},{},{}", st.label(), m.per_stage_accuracy[st.index()], b.tp, b.tn, b.fp, b.fn_);
    }
    let _ = writeln!(s, "overall,{},,,,", m.overall_accuracy);
    let _ = writeln!(s, "macro_f1,{},,,,", m.macro_f1);
    let _ = writeln!(s, "cohen_kappa,{},,,,", m.cohen_kappa);
    if let Some(t) = m.processing_time_s {
        let _ = writeln!(s, "processing_time_s,{t},,,,");
    }
    s
}

fn stage_bars_tsv(values: impl Iterator<Item = (f64, f64)>) -> String {
    let mut s = String::from("# stage\taccuracy_percent\tstd\n");
    for (st, (v, sd)) in SleepStage::ALL.iter().zip(values) {
        let _ = writeln!(s, "{}\t{v}\t{sd}", st.label());
    }
    s
}

// ---- commands ----

fn cmd_synth(cli: &Cli, a: &SynthArgs, out: &Outputs) -> Result<(), CliError> {
    check_name(&a.name)?;
    let stages = a
        .stages
        .split(',')
        .map(|s| s.parse::<SleepStage>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|bad| CliError::InvalidConfig(format!("unknown stage {bad:?} in --stages")))?;
    let mut spec = SynthSpec::balanced(&stages, a.epochs_per_stage, a.fs, a.noise, cli.seed);
    spec.channels = a.channels;
    let files = [format!("{}.edf", a.name), format!("{}.hyp", a.name)];
    // the generator validates the spec before doing any work
    let (rec, hyp) = generate_synthetic_recording(&spec)
        .map_err(|source| CliError::Edf { context: "synthetic spec".into(), source })?;
    out.claim(&files)?;
    let edf = write_edf(&rec).map_err(|source| CliError::Edf { context: "encoding EDF".into(), source })?;
    let p = out.write(&files[0], &edf)?;
    out.write(&files[1], hyp.to_text().as_bytes())?;
    println!("wrote {} ({} epochs, {} Hz)", p.display(), hyp.len(), a.fs);
    Ok(())
}

fn cmd_preprocess(cli: &Cli, a: &PreprocessArgs, out: &Outputs) -> Result<(), CliError> {
    check_name(&a.name)?;
    let mut cfg = PreprocessConfig {
        channel: a.channel,
        notch_hz: if a.no_notch { None } else { Some(a.notch) },
        band_lo_hz: a.band_lo,
        band_hi_hz: a.band_hi,
        band_order: a.order,
        ..PreprocessConfig::default()
    };
    cfg.autoencoder = if a.no_autoencoder || a.autoencoder.is_some() {
        None
    } else {
        Some(AutoencoderConfig { latent_dim: a.latent_dim, epochs: a.ae_epochs, ..AutoencoderConfig::default() })
    };
    let mut files = vec![format!("{}.ds", a.name)];
    if cfg.autoencoder.is_some() {
        files.push(format!("{}.ae", a.name));
    }
    let rec = parse_edf(&read(&a.edf)?)
        .map_err(|source| CliError::Edf { context: format!("reading {}", a.edf.display()), source })?;
    let hyp = match &a.hypnogram {
        None => None,
        Some(p) => {
            let text = String::from_utf8(read(p)?)
                .map_err(|_| CliError::InvalidConfig(format!("{} is not UTF-8 text", p.display())))?;
            Some(load_hypnogram(&text).map_err(|source| CliError::Edf { context: format!("reading {}", p.display()), source })?)
        }
    };
    let reuse = match &a.autoencoder {
        None => None,
        Some(p) => Some(
            model_store::load_autoencoder(&read(p)?).map_err(ctx_store(format!("reading {}", p.display())))?,
        ),
    };
    out.claim(&files)?;
    let provenance = a.edf.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let context = format!("preprocessing {}", a.edf.display());
    let (ds, ae) = match &reuse {
        None => preprocess_recording(&rec, hyp.as_ref(), &cfg, &provenance, cli.seed).map_err(ctx_pipe(context))?,
        Some(ae) => {
            let (images, labels) = recording_images(&rec, hyp.as_ref(), &cfg).map_err(ctx_pipe(context.clone()))?;
            (finish_dataset(Some(ae), &images, labels, &cfg, &provenance, cli.seed).map_err(ctx_pipe(context))?, None)
        }
    };
    let p = out.write(&files[0], &ds.to_bytes())?;
    if let Some(ae) = &ae {
        out.write(&files[1], &model_store::save_autoencoder(ae))?;
    }
    if ds.is_labeled() {
        let counts = ds.class_counts();
        let summary: Vec<String> = SleepStage::ALL.iter().map(|s| format!("{}={}", s.label(), counts[s.index()])).collect();
        log::info!("class counts: {}", summary.join(" "));
        println!("wrote {} ({} images of {}x{}; {})", p.display(), ds.len(), ds.height, ds.width, summary.join(" "));
    } else {
        println!("wrote {} ({} unlabeled images of {}x{})", p.display(), ds.len(), ds.height, ds.width);
    }
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs, out: &Outputs) -> Result<(), CliError> {
    check_name(&a.name)?;
    let base = a.opts.train_config(cli.seed)?;
    let runs: Vec<(String, TrainConfig)> = if a.alpha_sweep {
        if a.opts.mode != Mode::Proposed {
            return Err(CliError::InvalidConfig("--alpha-sweep varies the Leaky ReLU slope; use --mode proposed".into()));
        }
        ALPHA_SWEEP.iter().map(|&al| (format!("{}_alpha{al}", a.name), base.clone().with_alpha(al))).collect()
    } else {
        vec![(a.name.clone(), base)]
    };
    let mut files = Vec::new();
    for (name, _) in &runs {
        files.push(format!("{name}.model"));
        files.push(format!("{name}_history.csv"));
        if cli.emit_plot_data {
            files.push(format!("{name}_history.tsv"));
        }
    }
    if a.alpha_sweep {
        files.push(format!("{}_sweep.csv", a.name));
    }
    let ds = load_cache(&a.cache)?;
    ds.labels().map_err(ctx_pipe(format!("{} cannot be used for training", a.cache.display())))?;
    out.claim(&files)?;
    let mut sweep = String::from("alpha,final_loss,final_train_accuracy,model\n");
    for (name, cfg) in &runs {
        let outcome = pipeline::train(&ds, cfg).map_err(ctx_pipe(format!("training {name}")))?;
        let model_file = format!("{name}.model");
        out.write(&model_file, &model_store::save(&outcome.network, outcome.adam_state()))?;
        out.write(&format!("{name}_history.csv"), history_csv(&outcome.history).as_bytes())?;
        if cli.emit_plot_data {
            out.write(&format!("{name}_history.tsv"), history_tsv(&outcome.history).as_bytes())?;
        }
        let last = outcome.history.last();
        let alpha = match cfg.activation {
            Activation::LeakyRelu(al) => al.to_string(),
            _ => String::new(),
        };
        let loss = last.map(|r| r.loss.to_string()).unwrap_or_default();
        let acc = last.map(|r| r.accuracy.to_string()).unwrap_or_default();
        let _ = writeln!(sweep, "{alpha},{loss},{acc},{model_file}");
        match last {
            Some(r) => println!("{model_file}: {} epochs, loss {:.5}, train accuracy {:.2}%", r.epoch, r.loss, r.accuracy),
            None => println!("{model_file}: initialized, not trained"),
        }
        if cli.timing {
            println!("  training time {:.3} s", outcome.elapsed_s);
        }
    }
    if a.alpha_sweep {
        out.write(&format!("{}_sweep.csv", a.name), sweep.as_bytes())?;
    }
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs, out: &Outputs) -> Result<(), CliError> {
    check_name(&a.name)?;
    let mut files = vec![format!("{}.json", a.name), format!("{}.csv", a.name)];
    if cli.emit_plot_data {
        files.push(format!("{}_stages.tsv", a.name));
    }
    let net = load_model(&a.model)?;
    let ds = load_cache(&a.cache)?;
    let context = format!("evaluating {} on {}", a.model.display(), a.cache.display());
    pipeline::check_dims(&net, &ds).map_err(ctx_pipe(context.clone()))?;
    out.claim(&files)?;
    let start = std::time::Instant::now();
    let mut m = pipeline::evaluate(&net, &ds).map_err(ctx_pipe(context))?;
    if cli.timing {
        m.processing_time_s = Some(start.elapsed().as_secs_f64());
    }
    out.write(&files[0], (serde_json::to_string_pretty(&m).expect("report serializes") + "\n").as_bytes())?;
    out.write(&files[1], metrics_csv(&m).as_bytes())?;
    if cli.emit_plot_data {
        out.write(&files[2], stage_bars_tsv(m.per_stage_accuracy.iter().map(|&v| (v, 0.0))).as_bytes())?;
    }
    println!(
        "accuracy {:.2}%  macro F1 {:.4}  kappa {:.4}  ({} items)",
        m.overall_accuracy,
        m.macro_f1,
        m.cohen_kappa,
        m.total()
    );
    Ok(())
}

fn cmd_kfold(cli: &Cli, a: &KfoldArgs, out: &Outputs) -> Result<(), CliError> {
    check_name(&a.name)?;
    if a.jobs == 0 {
        return Err(CliError::InvalidConfig("--jobs must be at least 1".into()));
    }
    let cfg = a.opts.train_config(cli.seed)?;
    let mode = if a.holdout {
        SplitMode::Holdout { test_fraction: a.test_fraction }
    } else {
        SplitMode::KFold { k: a.k }
    };
    let mut files = vec![format!("{}.json", a.name), format!("{}.csv", a.name)];
    if cli.emit_plot_data {
        files.push(format!("{}_stages.tsv", a.name));
        files.push(format!("{}_history.tsv", a.name));
    }
    let ds = load_cache(&a.cache)?;
    ds.labels().map_err(ctx_pipe(format!("{} cannot be used for cross-validation", a.cache.display())))?;
    // split problems (k too large, bad fraction) surface before any output exists
    match mode {
        SplitMode::KFold { k } => pipeline::kfold_split(ds.len(), k, cli.seed).map(|_| ()),
        SplitMode::Holdout { test_fraction } => pipeline::holdout_split(ds.len(), test_fraction, cli.seed).map(|_| ()),
    }
    .map_err(ctx_pipe(format!("splitting {}", a.cache.display())))?;
    out.claim(&files)?;
    let report = run_experiment(&ds, &cfg, mode, a.jobs).map_err(ctx_pipe("cross-validation"))?;
    let report: ExperimentReport = if cli.timing { report } else { report.without_timing() };
    out.write(&files[0], (report.to_json() + "\n").as_bytes())?;
    out.write(&files[1], report.to_csv().as_bytes())?;
    if cli.emit_plot_data {
        let agg = &report.aggregate;
        out.write(&files[2], stage_bars_tsv(agg.per_stage_accuracy.iter().map(|s| (s.mean, s.std))).as_bytes())?;
        let mut s = String::new();
        for f in &report.folds {
            let _ = writeln!(s, "# fold {}", f.fold);
            s.push_str(&history_tsv(&f.history));
            s.push_str("\n\n");
        }
        out.write(&files[3], s.as_bytes())?;
    }
    let agg = &report.aggregate;
    println!(
        "{} folds: accuracy {:.2}% ± {:.2}  macro F1 {:.4}  kappa {:.4}",
        report.folds.len(),
        agg.overall_accuracy.mean,
        agg.overall_accuracy.std,
        agg.macro_f1.mean,
        agg.cohen_kappa.mean
    );
    Ok(())
}

fn cmd_classify(_cli: &Cli, a: &ClassifyArgs, out: &Outputs) -> Result<(), CliError> {
    check_name(&a.name)?;
    let files = [format!("{}.csv", a.name)];
    let net = load_model(&a.model)?;
    let ds = load_cache(&a.cache)?;
    let context = format!("classifying {} with {}", a.cache.display(), a.model.display());
    pipeline::check_dims(&net, &ds).map_err(ctx_pipe(context.clone()))?;
    out.claim(&files)?;
    let preds = pipeline::predict(&net, &ds).map_err(ctx_pipe(context))?;
    let mut s = String::from("epoch,stage");
    for st in SleepStage::ALL {
        let _ = write!(s, ",p_{}", st.label());
    }
    s.push('\n');
    for (i, (stage, p)) in preds.iter().enumerate() {
        let _ = write!(s, "{i},{}", stage.label());
        for v in p {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    let path = out.write(&files[0], s.as_bytes())?;
    println!("wrote {} ({} epochs)", path.display(), preds.len());
    Ok(())
}

/// Runs one parsed invocation.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let out = Outputs { dir: cli.out_dir.clone(), force: cli.force };
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a, &out),
        Command::Preprocess(a) => cmd_preprocess(cli, a, &out),
        Command::Train(a) => cmd_train(cli, a, &out),
        Command::Eval(a) => cmd_eval(cli, a, &out),
        Command::Kfold(a) => cmd_kfold(cli, a, &out),
        Command::Classify(a) => cmd_classify(cli, a, &out),
    }
}

/// Entry point of the binary: parse, run, report errors as `error[Kind]: ...`.
pub fn main_with_args(args: Vec<OsString>) -> ExitCode {
    let cli = match parse_args(args) {
        Ok(c) => c,
        Err(Ok(e)) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(Ok(e)) => return report(&usage_error(e)),
        Err(Err(e)) => return report(&e),
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("error[{}]: {e}", e.kind());
    ExitCode::FAILURE
}


#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<OsString> {
        std::iter::once("essc").chain(s.split_whitespace()).map(OsString::from).collect()
    }

    #[test]
    fn defaults_match_documented_values() {
        let cli = parse_args(args("kfold --cache x.ds")).unwrap();
        let Command::Kfold(k) = cli.command else { panic!() };
        assert_eq!(k.k, 20);
        assert_eq!(k.test_fraction, 0.15);
        assert_eq!(k.opts.epochs, 30);
        assert_eq!(k.opts.batch, 16);
        assert_eq!(k.opts.alpha, 0.1);
        let cfg = k.opts.train_config(cli.seed).unwrap();
        assert_eq!(cfg.optimizer, OptimizerChoice::adam(3e-5));
        let cli = parse_args(args("preprocess --edf a.edf")).unwrap();
        let Command::Preprocess(p) = cli.command else { panic!() };
        assert_eq!((p.band_lo, p.band_hi, p.order, p.notch), (0.5, 30.0, 8, 50.0));
    }

    #[test]
    fn config_file_fills_and_cli_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "# training\nepochs = 3\nlr=0.001 # inline\nno_se = true\nseed = 7\n").unwrap();
        let cli = parse_args(args(&format!("train --cache c.ds --config {} --epochs 5", cfg.display()))).unwrap();
        assert_eq!(cli.seed, 7);
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.opts.epochs, 5);
        assert_eq!(t.opts.lr, Some(0.001));
        assert!(t.opts.no_se);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.conf");
        fs::write(&cfg, "epochz = 3\n").unwrap();
        let err = parse_args(args(&format!("train --cache c.ds --config {}", cfg.display()))).unwrap_err();
        assert!(matches!(err, Err(CliError::InvalidConfig(m)) if m.contains("epochz")));
    }

    #[test]
    fn config_syntax() {
        assert!(parse_config_file("just words").is_err());
        assert!(parse_config_file("a = 1\na = 2").is_err());
        let m = parse_config_file("\n  # only comments\nk-fold = 4").unwrap();
        assert_eq!(m["k-fold"], "4");
    }

    #[test]
    fn baseline_rejects_sweep() {
        let cli = parse_args(args("train --cache c.ds --mode baseline --alpha-sweep")).unwrap();
        assert!(matches!(execute(&cli), Err(CliError::InvalidConfig(_))));
    }

    #[test]
    fn synth_fs_floor() {
        let dir = tempfile::tempdir().unwrap();
        let cli = parse_args(args(&format!("synth --fs 32 --out-dir {}", dir.path().display()))).unwrap();
        let e = execute(&cli).unwrap_err();
        assert_eq!(e.kind(), "InvalidSpec");
        assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
