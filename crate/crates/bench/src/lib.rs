//! Benchmark fixtures.

use distsim::synth::{LatentClassConfig, LatentClassSource};
use distsim::{BackoffModel, BackoffOptions, PairCounts, SparseDistribution};

/// Counts of `sample` pairs drawn from a latent-class source.
pub fn latent_counts(objects: usize, contexts: usize, sample: usize, seed: u64) -> PairCounts {
    let cfg = LatentClassConfig {
        objects,
        contexts,
        seed,
        ..Default::default()
    };
    LatentClassSource::new(cfg)
        .expect("valid source")
        .sample(sample, seed.wrapping_add(1))
        .counts()
}

/// MLE and Katz-smoothed rows of the first `n` usable objects.
pub fn rows(counts: &PairCounts, n: usize) -> (Vec<SparseDistribution>, Vec<SparseDistribution>) {
    let katz = BackoffModel::build(counts, BackoffOptions::default()).expect("Katz model");
    counts
        .usable_objects()
        .take(n)
        .map(|x| {
            let mle = counts.mle_distribution(x).expect("usable");
            let smooth = katz.smoothed_distribution(x).expect("usable");
            (mle, smooth)
        })
        .unzip()
}
