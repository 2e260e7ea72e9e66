use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffled k-fold partition of `0..n`; fold sizes differ by at most one.
/// Index lists are sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("cannot split {n} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut test = order[start..start + size].to_vec();
        test.sort_unstable();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + size..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

/// Outer and inner cross-validation layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvPlan {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    /// Used instead of outer k-fold when `outer_folds` is 1.
    pub fixed_split: Option<Fold>,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            outer_folds: 5,
            inner_folds: 5,
            seed: 0,
            fixed_split: None,
        }
    }
}

impl CvPlan {
    pub fn fixed(split: Fold, inner_folds: usize, seed: u64) -> Self {
        Self {
            outer_folds: 1,
            inner_folds,
            seed,
            fixed_split: Some(split),
        }
    }

    pub fn outer_splits(&self, n: usize, seed: u64) -> Result<Vec<Fold>> {
        if self.outer_folds == 1 {
            let Some(split) = &self.fixed_split else {
                return Err(Error::InvalidArgument("outer_folds = 1 requires a fixed_split".into()));
            };
            let mut seen = vec![false; n];
            for &i in split.train.iter().chain(&split.test) {
                if i >= n || seen[i] {
                    return Err(Error::InvalidArgument(format!("fixed split index {i} out of range or repeated")));
                }
                seen[i] = true;
            }
            if split.train.is_empty() || split.test.is_empty() {
                return Err(Error::InvalidArgument("fixed split needs train and test rows".into()));
            }
            return Ok(vec![split.clone()]);
        }
        kfold_split(n, self.outer_folds, seed)
    }
}
