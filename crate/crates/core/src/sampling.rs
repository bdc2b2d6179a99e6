//! Class-balanced training subsets.
//!
//! The non-P300 pool is shuffled and split into `k` equal parts. Every subset
//! pairs one part with the complete P300 set, which is shared by reference.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SUBSETS: usize = 5;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;

/// Indices into an epoch set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedSubset {
    pub subset_index: usize,
    pub rng_seed: u64,
    pub p300: Arc<[usize]>,
    pub non_p300: Vec<usize>,
    /// Set when the pool did not split evenly and this subset absorbed the remainder.
    #[serde(default)]
    pub uneven: bool,
}

impl BalancedSubset {
    pub fn p300_count(&self) -> usize {
        self.p300.len()
    }

    pub fn non_p300_count(&self) -> usize {
        self.non_p300.len()
    }

    pub fn len(&self) -> usize {
        self.p300.len() + self.non_p300.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All members with labels, P300 first.
    pub fn members(&self) -> Vec<(usize, bool)> {
        self.p300
            .iter()
            .map(|&i| (i, true))
            .chain(self.non_p300.iter().map(|&i| (i, false)))
            .collect()
    }
}

/// Builds `k` subsets from per-epoch labels. With `strict`, a non-P300 pool that
/// is not divisible by `k` is an error; otherwise the last subset absorbs the
/// remainder and is flagged.
pub fn balance_subsets(
    labels: &[bool],
    k: usize,
    seed: u64,
    strict: bool,
) -> Result<Vec<BalancedSubset>> {
    if k == 0 {
        return Err(Error::domain("subset count must be positive"));
    }
    let p300: Arc<[usize]> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, &y)| y.then_some(i))
        .collect();
    let mut pool: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, &y)| (!y).then_some(i))
        .collect();
    if pool.len() < k {
        return Err(Error::Partition(format!(
            "{} non-P300 epochs cannot fill {k} subsets",
            pool.len()
        )));
    }
    let rem = pool.len() % k;
    if strict && rem != 0 {
        return Err(Error::Partition(format!(
            "{} non-P300 epochs do not divide into {k} equal subsets",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let part = pool.len() / k;
    Ok((0..k)
        .map(|s| {
            let end = if s + 1 == k {
                pool.len()
            } else {
                (s + 1) * part
            };
            BalancedSubset {
                subset_index: s,
                rng_seed: seed,
                p300: Arc::clone(&p300),
                non_p300: pool[s * part..end].to_vec(),
                uneven: s + 1 == k && rem != 0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<(usize, bool)>,
    pub validation: Vec<(usize, bool)>,
}

/// Stratified split: `floor(fraction · n)` of each class is held out, at least one
/// and never the whole class.
pub fn split_validation(subset: &BalancedSubset, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain(format!(
            "validation fraction {fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (members, label) in [
        (subset.p300.to_vec(), true),
        (subset.non_p300.clone(), false),
    ] {
        let n = members.len();
        if n < 2 {
            return Err(Error::domain(format!(
                "class {} has {n} members; both parts need at least one",
                if label { "P300" } else { "non-P300" }
            )));
        }
        let held = ((fraction * n as f64).floor() as usize).clamp(1, n - 1);
        let mut shuffled = members;
        shuffled.shuffle(&mut rng);
        validation.extend(shuffled[..held].iter().map(|&i| (i, label)));
        train.extend(shuffled[held..].iter().map(|&i| (i, label)));
    }
    Ok(Split { train, validation })
}

/// JSON-friendly record of subset membership for audits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetManifest {
    pub seed: u64,
    pub subsets: Vec<SubsetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetEntry {
    pub subset_index: usize,
    pub p300: Vec<usize>,
    pub non_p300: Vec<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl SubsetManifest {
    pub fn new(seed: u64, subsets: &[BalancedSubset], splits: &[Split]) -> Self {
        Self {
            seed,
            subsets: subsets
                .iter()
                .zip(splits)
                .map(|(s, sp)| SubsetEntry {
                    subset_index: s.subset_index,
                    p300: s.p300.to_vec(),
                    non_p300: s.non_p300.clone(),
                    train: sp.train.iter().map(|m| m.0).collect(),
                    validation: sp.validation.iter().map(|m| m.0).collect(),
                })
                .collect(),
        }
    }
}
