use rand::seq::SliceRandom;
use serde::Serialize;

use super::PipelineError;
use crate::rng::seeded;

pub const DEFAULT_FOLDS: usize = 20;
pub const DEFAULT_TEST_FRACTION: f64 = 0.15;

/// Fold index per item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// Item indices of every fold, ascending.
    pub fn folds(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &f) in self.assignment.iter().enumerate() {
            out[f].push(i);
        }
        out
    }

    /// (train, test) indices with `fold` held out.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..self.assignment.len()).partition(|&i| self.assignment[i] == fold);
        (train, test)
    }
}

/// Random permutation cut round-robin into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan, PipelineError> {
    if k < 2 || n < k {
        return Err(PipelineError::TooFewItems { items: n, needed: k.max(2) });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(seed));
    let mut assignment = vec![0; n];
    for (pos, &item) in perm.iter().enumerate() {
        assignment[item] = pos % k;
    }
    Ok(FoldPlan { k, assignment })
}

/// Random split with `round(n * fraction)` test items, at least one and at
/// most `n - 1`. Both halves are returned ascending.
pub fn holdout_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PipelineError::InvalidConfig(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    if n < 2 {
        return Err(PipelineError::TooFewItems { items: n, needed: 2 });
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(seed));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
