use std::collections::BTreeMap;

use rand::Rng as _;

use super::{DspError, TimeSeries};
use crate::edf_io::{Hypnogram, SleepStage};
use crate::rng::seeded;

/// Fixed-length windows cut from one channel, optionally labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub epochs: Vec<Vec<f64>>,
    pub labels: Option<Vec<SleepStage>>,
    pub epoch_len_samples: usize,
    pub fs: f64,
}

impl EpochSet {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<SleepStage, usize> {
        let mut counts = BTreeMap::new();
        for &l in self.labels.iter().flatten() {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }
}

/// Cut `ts` into consecutive `epoch_s` windows, dropping the partial tail.
///
/// With a hypnogram, the epoch count is the shorter of the two so labels align.
pub fn segment_epochs(ts: &TimeSeries, hyp: Option<&Hypnogram>, epoch_s: f64) -> Result<EpochSet, DspError> {
    let len = (epoch_s * ts.fs).round() as usize;
    if len == 0 || ts.samples.len() < len {
        return Err(DspError::TooShort { duration_s: ts.duration_s(), epoch_s });
    }
    let mut count = ts.samples.len() / len;
    let labels = hyp.map(|h| {
        count = count.min(h.stages.len());
        h.stages[..count].to_vec()
    });
    let epochs = ts.samples.chunks_exact(len).take(count).map(<[f64]>::to_vec).collect();
    Ok(EpochSet { epochs, labels, epoch_len_samples: len, fs: ts.fs })
}

/// Indices that balance `labels`: every original index once, then for each
/// minority class uniform draws with replacement from that class until it
/// reaches the majority count.
pub fn oversample_indices(labels: &[SleepStage], seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<SleepStage, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let target = by_class.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = seeded(seed);
    let mut out: Vec<usize> = (0..labels.len()).collect();
    for members in by_class.values() {
        for _ in members.len()..target {
            out.push(members[rng.random_range(0..members.len())]);
        }
    }
    out
}

/// Duplicate minority-class epochs until every present class matches the largest one.
pub fn oversample_classes(es: &EpochSet, seed: u64) -> Result<EpochSet, DspError> {
    let labels = es.labels.as_ref().ok_or(DspError::MissingLabels)?;
    if labels.is_empty() {
        return Err(DspError::EmptyClass);
    }
    let idx = oversample_indices(labels, seed);
    Ok(EpochSet {
        epochs: idx.iter().map(|&i| es.epochs[i].clone()).collect(),
        labels: Some(idx.iter().map(|&i| labels[i]).collect()),
        epoch_len_samples: es.epoch_len_samples,
        fs: es.fs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use SleepStage::*;

    fn labeled(labels: &[SleepStage]) -> EpochSet {
        EpochSet {
            epochs: (0..labels.len()).map(|i| vec![i as f64; 4]).collect(),
            labels: Some(labels.to_vec()),
            epoch_len_samples: 4,
            fs: 64.0,
        }
    }

    #[test]
    fn floor_epoch_count() {
        let ts = TimeSeries::new(vec![0.0; 95 * 64], 64.0).unwrap();
        let es = segment_epochs(&ts, None, 30.0).unwrap();
        assert_eq!(es.len(), 3);
        assert!(es.epochs.iter().all(|e| e.len() == 1920));
        assert_eq!(es.epochs.iter().map(Vec::len).sum::<usize>(), 3 * es.epoch_len_samples);
    }

    #[test]
    fn labels_align() {
        let ts = TimeSeries::new(vec![0.0; 60 * 64], 64.0).unwrap();
        let h = Hypnogram::new(vec![Wake, S2, REM]);
        let es = segment_epochs(&ts, Some(&h), 30.0).unwrap();
        assert_eq!(es.labels, Some(vec![Wake, S2]));
    }

    #[test]
    fn too_short() {
        let ts = TimeSeries::new(vec![0.0; 29 * 64], 64.0).unwrap();
        assert!(matches!(segment_epochs(&ts, None, 30.0), Err(DspError::TooShort { .. })));
    }

    #[test]
    fn balanced_set_unchanged() {
        let labels: Vec<_> = SleepStage::ALL.iter().flat_map(|&s| [s; 4]).collect();
        let es = labeled(&labels);
        assert_eq!(oversample_classes(&es, 0).unwrap(), es);
    }

    #[test]
    fn forced_duplication() {
        let es = labeled(&[Wake, Wake, REM, Wake]);
        let out = oversample_classes(&es, 3).unwrap();
        let counts = out.class_counts();
        assert_eq!(counts[&Wake], 3);
        assert_eq!(counts[&REM], 3);
        assert_eq!(&out.epochs[..4], &es.epochs[..]);
        assert!(out.epochs[4..].iter().all(|e| e == &es.epochs[2]));
    }

    #[test]
    fn deterministic() {
        let es = labeled(&[Wake, Wake, Wake, Wake, Wake, S1, S1, S2, S2, S2]);
        assert_eq!(oversample_classes(&es, 1).unwrap(), oversample_classes(&es, 1).unwrap());
    }

    #[test]
    fn errors() {
        let mut es = labeled(&[Wake]);
        es.labels = None;
        assert_eq!(oversample_classes(&es, 0), Err(DspError::MissingLabels));
        assert_eq!(oversample_classes(&labeled(&[]), 0), Err(DspError::EmptyClass));
    }
}
