use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate, holdout_split, kfold_split, mean, std_dev, train, Dataset, EpochRecord, MetricsReport, PipelineError, TrainConfig};
use crate::edf_io::SleepStage;
use crate::rng::sub_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitMode {
    KFold { k: usize },
    Holdout { test_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub metrics: MetricsReport,
    pub history: Vec<EpochRecord>,
}

/// Mean and population standard deviation of one statistic across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    fn of(xs: &[f64]) -> Self {
        Self { mean: mean(xs), std: std_dev(xs).unwrap_or(0.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub overall_accuracy: Spread,
    pub macro_f1: Spread,
    pub cohen_kappa: Spread,
    pub per_stage_accuracy: [Spread; SleepStage::COUNT],
    pub processing_time_s: Option<Spread>,
}

impl AggregateReport {
    pub fn from_folds(folds: &[FoldReport]) -> Self {
        let pick = |f: &dyn Fn(&MetricsReport) -> f64| Spread::of(&folds.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
        let times: Option<Vec<f64>> = folds.iter().map(|r| r.metrics.processing_time_s).collect();
        Self {
            overall_accuracy: pick(&|m| m.overall_accuracy),
            macro_f1: pick(&|m| m.macro_f1),
            cohen_kappa: pick(&|m| m.cohen_kappa),
            per_stage_accuracy: std::array::from_fn(|s| pick(&|m| m.per_stage_accuracy[s])),
            processing_time_s: times.map(|t| Spread::of(&t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub mode: SplitMode,
    pub config: TrainConfig,
    pub items: usize,
    pub folds: Vec<FoldReport>,
    pub aggregate: AggregateReport,
    pub total_time_s: Option<f64>,
}

impl ExperimentReport {
    /// Drops every wall-clock figure so the report depends only on its inputs.
    pub fn without_timing(mut self) -> Self {
        for f in &mut self.folds {
            f.metrics.processing_time_s = None;
        }
        self.aggregate.processing_time_s = None;
        self.total_time_s = None;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per fold, then `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let timing = self.aggregate.processing_time_s.is_some();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["fold", "train_size", "test_size", "overall_accuracy", "macro_f1", "cohen_kappa"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(SleepStage::ALL.iter().map(|s| format!("accuracy_{}", s.label())));
        if timing {
            header.push("processing_time_s".into());
        }
        w.write_record(&header).expect("in-memory write");
        for f in &self.folds {
            let m = &f.metrics;
            let mut row = vec![
                f.fold.to_string(),
                f.train_size.to_string(),
                f.test_size.to_string(),
                m.overall_accuracy.to_string(),
                m.macro_f1.to_string(),
                m.cohen_kappa.to_string(),
            ];
            row.extend(m.per_stage_accuracy.iter().map(f64::to_string));
            if timing {
                row.push(m.processing_time_s.unwrap_or(0.0).to_string());
            }
            w.write_record(&row).expect("in-memory write");
        }
        let a = &self.aggregate;
        for (name, get) in [("mean", (|s: &Spread| s.mean) as fn(&Spread) -> f64), ("std", |s: &Spread| s.std)] {
            let mut row = vec![name.to_string(), String::new(), String::new()];
            row.extend([&a.overall_accuracy, &a.macro_f1, &a.cohen_kappa].iter().map(|s| get(s).to_string()));
            row.extend(a.per_stage_accuracy.iter().map(|s| get(s).to_string()));
            if let Some(t) = &a.processing_time_s {
                row.push(get(t).to_string());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
    }
}

fn run_fold(
    dataset: &Dataset,
    cfg: &TrainConfig,
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<FoldReport, PipelineError> {
    let start = Instant::now();
    // oversampling happens inside `train`, so it only ever sees training items
    let fold_cfg = TrainConfig { seed: sub_seed(cfg.seed, fold as u64), ..cfg.clone() };
    let outcome = train(&dataset.subset(train_idx), &fold_cfg)?;
    let mut metrics = evaluate(&outcome.network, &dataset.subset(test_idx))?;
    metrics.processing_time_s = Some(start.elapsed().as_secs_f64());
    log::info!("fold {fold}: accuracy {:.2}%", metrics.overall_accuracy);
    Ok(FoldReport { fold, train_size: train_idx.len(), test_size: test_idx.len(), metrics, history: outcome.history })
}

/// Split, train and evaluate. Folds run on up to `jobs` threads; results are
/// identical for any thread count.
pub fn run_experiment(
    dataset: &Dataset,
    cfg: &TrainConfig,
    mode: SplitMode,
    jobs: usize,
) -> Result<ExperimentReport, PipelineError> {
    cfg.validate()?;
    dataset.labels()?;
    let start = Instant::now();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = match mode {
        SplitMode::KFold { k } => {
            let plan = kfold_split(dataset.len(), k, cfg.seed)?;
            (0..k).map(|f| plan.split(f)).collect()
        }
        SplitMode::Holdout { test_fraction } => vec![holdout_split(dataset.len(), test_fraction, cfg.seed)?],
    };
    let run = |(fold, (tr, te)): (usize, &(Vec<usize>, Vec<usize>))| run_fold(dataset, cfg, fold, tr, te);
    let folds: Vec<FoldReport> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| PipelineError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| splits.par_iter().enumerate().map(run).collect::<Result<_, _>>())?
    } else {
        splits.iter().enumerate().map(run).collect::<Result<_, _>>()?
    };
    let aggregate = AggregateReport::from_folds(&folds);
    Ok(ExperimentReport {
        mode,
        config: cfg.clone(),
        items: dataset.len(),
        folds,
        aggregate,
        total_time_s: Some(start.elapsed().as_secs_f64()),
    })
}
