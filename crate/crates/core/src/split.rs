//! Random train/test partitions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// One random partition of `{0, .., n-1}` into a training and a test set.
///
/// Both index lists are ascending, so overlaps between the test sets of two
/// splits are a linear merge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    split_id: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl SplitPlan {
    /// Builds a plan from explicit index sets, checking that they partition
    /// `{0, .., n-1}` with a non-empty training set and at least two test rows.
    pub fn from_indices(split_id: usize, n: usize, mut train: Vec<usize>, mut test: Vec<usize>) -> Result<Self> {
        train.sort_unstable();
        test.sort_unstable();
        if train.is_empty() || test.len() < 2 || train.len() + test.len() != n {
            return Err(Error::InvalidSizes { n, n1: train.len() });
        }
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&test) {
            if i >= n || seen[i] {
                return Err(Error::InvalidDataset(format!(
                    "split {split_id}: index {i} out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        Ok(SplitPlan { split_id, train, test })
    }

    pub fn split_id(&self) -> usize {
        self.split_id
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn n(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn n1(&self) -> usize {
        self.train.len()
    }

    pub fn n2(&self) -> usize {
        self.test.len()
    }
}

/// Draws `count` distinct indices from `0..n` uniformly, in draw order
/// (partial Fisher-Yates on `u64` ranges, so the sequence is word-size independent).
pub(crate) fn sample_indices<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(count <= n);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i as u64..n as u64) as usize;
        perm.swap(i, j);
    }
    perm.truncate(count);
    perm
}

fn check_sizes(n: usize, n1: usize) -> Result<()> {
    if n1 < 1 || n1 + 2 > n {
        return Err(Error::InvalidSizes { n, n1 });
    }
    Ok(())
}

fn draw_split<R: Rng + ?Sized>(split_id: usize, n: usize, n1: usize, rng: &mut R) -> SplitPlan {
    let mut train = sample_indices(n, n1, rng);
    train.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..n).filter(|&i| !in_train[i]).collect();
    SplitPlan { split_id, train, test }
}

/// A uniformly random `n1`-subset as training set, the complement as test set.
pub fn make_split(n: usize, n1: usize, rng: &RngState) -> Result<SplitPlan> {
    check_sizes(n, n1)?;
    Ok(draw_split(0, n, n1, &mut rng.rng()))
}

/// Splits `0..=k`, each drawn independently from its own sub-stream of `rng`.
/// Split 0 is the designated split whose model is being evaluated. Splits
/// may coincide by chance.
pub fn make_split_family(n: usize, n1: usize, k: usize, rng: &RngState) -> Result<Vec<SplitPlan>> {
    check_sizes(n, n1)?;
    Ok((0..=k)
        .map(|id| draw_split(id, n, n1, &mut rng.substream(id as u64).rng()))
        .collect())
}
