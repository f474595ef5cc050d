use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::Dataset;
use crate::{Error, Result};

/// Index sets of the training-pool partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    /// Candidate-train rows that are not used at all.
    pub discarded: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffles `0..n`, sends the second half to validation and keeps a random
/// half of the first half for training. Index lists are returned sorted.
pub fn split_indices(n: usize, seed: u64) -> Result<SplitIndices> {
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 samples to split, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (candidate, validation) = order.split_at(n / 2);
    let mut candidate = candidate.to_vec();
    candidate.shuffle(&mut rng);
    let (train, discarded) = candidate.split_at(candidate.len() / 2);

    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitIndices {
        train: sorted(train),
        discarded: sorted(discarded),
        validation: sorted(validation),
    })
}

/// Training and validation subsets of a pooled dataset.
pub fn split_dataset(data: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let idx = split_indices(data.len(), seed)?;
    Ok((data.select(&idx.train), data.select(&idx.validation)))
}
