use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Record indices of the three partitions, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// (train, validation, test) sizes for a class of `n` records: 70 % rounded
/// down for training, the rest halved with validation rounded half up.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let train = 7 * n / 10;
    let rest = n - train;
    let val = rest.div_ceil(2);
    (train, val, rest - val)
}

/// Stratified, seeded 70/15/15 partition of record indices by `keys`.
pub fn split_dataset<K: Ord + Clone + std::fmt::Debug>(keys: &[K], seed: u64) -> Result<Split> {
    if keys.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 records to split, got {}",
            keys.len()
        )));
    }
    let mut classes: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        classes.entry(k.clone()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (k, mut idx) in classes {
        if idx.len() < 2 {
            return Err(Error::InsufficientData(format!("class {k:?} has a single record")));
        }
        idx.shuffle(&mut rng);
        let (tr, va, _) = split_counts(idx.len());
        out.train.extend_from_slice(&idx[..tr]);
        out.validation.extend_from_slice(&idx[tr..tr + va]);
        out.test.extend_from_slice(&idx[tr + va..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
