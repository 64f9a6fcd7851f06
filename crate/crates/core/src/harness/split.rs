//! Seeded tuning/test splits and k-fold partitions over example indices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::nncore::SeededRng;

const MIN_SPLIT: usize = 5;

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut SeededRng::seed_from_u64(seed));
    idx
}

/// Shuffles `0..n` and returns `(tuning, test)` with `round(n / 5)` tuning indices.
pub fn split_tuning_test(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>), HarnessError> {
    if n < MIN_SPLIT {
        return Err(HarnessError::TooFewExamples {
            needed: MIN_SPLIT,
            found: n,
        });
    }
    let mut idx = shuffled(n, seed);
    let test = idx.split_off((2 * n + 5) / 10);
    Ok((idx, test))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.folds.iter().map(Vec::len).collect()
    }

    /// Every index outside fold `k`, in fold order.
    pub fn training_indices(&self, k: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }
}

/// Shuffles `0..n` and cuts it into `k` contiguous folds; the first `n % k` are one larger.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan, HarnessError> {
    if k < 2 || n < k {
        return Err(HarnessError::TooFewExamples {
            needed: k.max(2),
            found: n,
        });
    }
    let idx = shuffled(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldPlan { folds })
}
