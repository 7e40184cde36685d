use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Occurrence, OccurrenceList, PairCounts};
use crate::error::{Error, Result};

/// How a corpus is divided into training data and cross-validation folds.
#[derive(Debug, Clone, Copy)]
pub struct SplitOptions {
    pub folds: usize,
    pub seed: u64,
    /// Keep only held-out occurrences whose pair never occurs in training.
    pub unseen_only: bool,
    /// Fraction of occurrences held out from training.
    pub heldout_fraction: f64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            folds: 5,
            seed: 0,
            unseen_only: true,
            heldout_fraction: 0.2,
        }
    }
}

/// One cross-validation round: a training table, a tuning set and a test set.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Arc<PairCounts>,
    pub tune: Vec<Occurrence>,
    pub test: Vec<Occurrence>,
    pub fold: usize,
    pub seed: u64,
}

/// Training table plus the held-out occurrences dealt into folds.
#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub train: Arc<PairCounts>,
    pub folds: Vec<Vec<Occurrence>>,
    pub seed: u64,
}

impl CrossValidation {
    pub fn num_folds(&self) -> usize {
        self.folds.len()
    }

    /// Fold `i` as test set, every other fold merged into the tuning set.
    pub fn fold(&self, i: usize) -> CorpusSplit {
        let tune = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        CorpusSplit {
            train: Arc::clone(&self.train),
            tune,
            test: self.folds[i].clone(),
            fold: i,
            seed: self.seed,
        }
    }

    pub fn splits(&self) -> impl Iterator<Item = CorpusSplit> + '_ {
        (0..self.num_folds()).map(move |i| self.fold(i))
    }
}

/// Shuffles `items` with `seed` and deals them round-robin into `folds`
/// parts, so part sizes differ by at most one.
pub fn partition_folds<T: Clone>(items: &[T], folds: usize, seed: u64) -> Vec<Vec<T>> {
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::with_capacity(items.len() / folds.max(1) + 1); folds];
    for (i, item) in shuffled.into_iter().enumerate() {
        out[i % folds].push(item);
    }
    out
}

/// Splits a corpus into a training table and `folds` held-out parts.
///
/// The vocabularies of the training table cover the whole corpus, so held-out
/// occurrences keep valid ids even when an object never occurs in training.
pub fn split_corpus(corpus: &OccurrenceList, opts: &SplitOptions) -> Result<CrossValidation> {
    if opts.folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "folds must be at least 2, got {}",
            opts.folds
        )));
    }
    if !(0.0..1.0).contains(&opts.heldout_fraction) {
        return Err(Error::InvalidParameter(format!(
            "held-out fraction must lie in [0,1), got {}",
            opts.heldout_fraction
        )));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<Occurrence> = corpus.occurrences.clone();
    order.shuffle(&mut rng);
    let n_heldout = (order.len() as f64 * opts.heldout_fraction).round() as usize;
    let heldout = order.split_off(order.len() - n_heldout);
    let train = PairCounts::from_occurrences(corpus.objects.clone(), corpus.contexts.clone(), &order);

    let candidates: Vec<Occurrence> = if opts.unseen_only {
        heldout.into_iter().filter(|&(x, y)| train.count(x, y) == 0).collect()
    } else {
        heldout
    };

    let folds = if candidates.is_empty() {
        log::warn!("no held-out candidates remain; every fold is empty");
        vec![Vec::new(); opts.folds]
    } else {
        let distinct: HashSet<Occurrence> = candidates.iter().copied().collect();
        if distinct.len() < opts.folds {
            return Err(Error::InvalidParameter(format!(
                "{} folds requested but only {} distinct held-out pairs",
                opts.folds,
                distinct.len()
            )));
        }
        partition_folds(&candidates, opts.folds, opts.seed.wrapping_add(1))
    };

    Ok(CrossValidation {
        train: Arc::new(train),
        folds,
        seed: opts.seed,
    })
}
