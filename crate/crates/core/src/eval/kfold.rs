use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous, order-preserving k-fold plan. Earlier folds take the extra
/// rows when `n` is not divisible by `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub folds: Vec<Range<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.folds.iter().map(|r| r.len()).collect()
    }

    /// Indices outside fold `i`, ascending.
    pub fn train_indices(&self, i: usize) -> Vec<usize> {
        let test = &self.folds[i];
        (0..test.start).chain(test.end..self.n).collect()
    }

    pub fn test_indices(&self, i: usize) -> Vec<usize> {
        self.folds[i].clone().collect()
    }
}

pub fn kfold_split(n: usize, k: usize) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::param(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::param(format!("cannot split {n} rows into {k} folds")));
    }
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    let folds = (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let range = start..start + len;
            start += len;
            range
        })
        .collect();
    Ok(FoldPlan { n, folds })
}
