use serde::Serialize;

use super::PipelineError;
use crate::edf_io::SleepStage;

const K: usize = SleepStage::COUNT;

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> Result<f64, PipelineError> {
    if xs.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    Ok((xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One-vs-rest counts for one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    /// `(TP + TN) / (TP + TN + FP + FN)` in percent.
    pub fn accuracy(&self) -> f64 {
        let total = self.tp + self.tn + self.fp + self.fn_;
        if total == 0 {
            0.0
        } else {
            100.0 * (self.tp + self.tn) as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// `confusion[true][predicted]`.
    pub confusion: [[u64; K]; K],
    pub per_stage_accuracy: [f64; K],
    pub overall_accuracy: f64,
    pub macro_f1: f64,
    pub cohen_kappa: f64,
    pub processing_time_s: Option<f64>,
}

impl MetricsReport {
    pub fn from_predictions(truth: &[SleepStage], predicted: &[SleepStage]) -> Result<Self, PipelineError> {
        if truth.len() != predicted.len() {
            return Err(PipelineError::DimensionMismatch(format!(
                "{} labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = [[0u64; K]; K];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: [[u64; K]; K]) -> Result<Self, PipelineError> {
        let total: u64 = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(PipelineError::EmptyDataset);
        }
        let diag: u64 = (0..K).map(|i| confusion[i][i]).sum();
        let mut report = Self {
            confusion,
            per_stage_accuracy: [0.0; K],
            overall_accuracy: 100.0 * diag as f64 / total as f64,
            macro_f1: 0.0,
            cohen_kappa: 0.0,
            processing_time_s: None,
        };
        let mut f1_sum = 0.0;
        let mut f1_classes = 0;
        for c in 0..K {
            let b = report.binary(c);
            report.per_stage_accuracy[c] = b.accuracy();
            // classes absent from both truth and predictions carry no information
            if b.tp + b.fp + b.fn_ > 0 {
                f1_sum += 2.0 * b.tp as f64 / (2 * b.tp + b.fp + b.fn_) as f64;
                f1_classes += 1;
            }
        }
        report.macro_f1 = if f1_classes > 0 { f1_sum / f1_classes as f64 } else { 0.0 };
        let n = total as f64;
        let po = diag as f64 / n;
        let pe: f64 = (0..K)
            .map(|c| {
                let row: u64 = confusion[c].iter().sum();
                let col: u64 = (0..K).map(|r| confusion[r][c]).sum();
                row as f64 * col as f64 / (n * n)
            })
            .sum();
        report.cohen_kappa = if (1.0 - pe).abs() < 1e-15 {
            if (po - 1.0).abs() < 1e-15 {
                1.0
            } else {
                0.0
            }
        } else {
            (po - pe) / (1.0 - pe)
        };
        Ok(report)
    }

    pub fn binary(&self, class: usize) -> BinaryCounts {
        let total: u64 = self.confusion.iter().flatten().sum();
        let tp = self.confusion[class][class];
        let fn_ = self.confusion[class].iter().sum::<u64>() - tp;
        let fp = (0..K).map(|r| self.confusion[r][class]).sum::<u64>() - tp;
        BinaryCounts { tp, tn: total - tp - fn_ - fp, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.per_stage_accuracy.iter().all(|v| v.is_finite())
            && self.overall_accuracy.is_finite()
            && self.macro_f1.is_finite()
            && self.cohen_kappa.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SleepStage::*;

    #[test]
    fn std_dev_values() {
        assert_eq!(std_dev(&[3.0; 4]).unwrap(), 0.0);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(std_dev(&[1.5]).unwrap(), 0.0);
        assert_eq!(std_dev(&[]), Err(PipelineError::EmptyInput));
    }

    #[test]
    fn perfect_predictor() {
        let t = [Wake, S1, S2, SWS, REM, REM, S2];
        let r = MetricsReport::from_predictions(&t, &t).unwrap();
        assert_eq!(r.overall_accuracy, 100.0);
        assert_eq!(r.cohen_kappa, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        for i in 0..K {
            for j in 0..K {
                if i != j {
                    assert_eq!(r.confusion[i][j], 0);
                }
            }
        }
    }

    #[test]
    fn single_class_perfect_kappa() {
        let r = MetricsReport::from_predictions(&[REM; 4], &[REM; 4]).unwrap();
        assert_eq!(r.cohen_kappa, 1.0);
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let t: Vec<SleepStage> = SleepStage::ALL.iter().flat_map(|&s| [s, s]).collect();
        let r = MetricsReport::from_predictions(&t, &[S2; 10]).unwrap();
        assert!(r.cohen_kappa.abs() < 1e-12);
        assert!((r.overall_accuracy - 20.0).abs() < 1e-12);
    }

    #[test]
    fn one_vs_rest_arithmetic() {
        let b = BinaryCounts { tp: 3, tn: 5, fp: 1, fn_: 1 };
        assert!((b.accuracy() - 80.0).abs() < 1e-12);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(MetricsReport::from_predictions(&[], &[]), Err(PipelineError::EmptyDataset));
    }
}
