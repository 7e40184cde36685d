//! Similarity-based estimation of word cooccurrence probabilities.
//!
//! Two families of estimators are provided for pairs `(x, y)` that never
//! occurred in training:
//!
//! - [`cluster`]: soft distributional clustering by deterministic annealing,
//!   where `P(y|x)` is mediated by cluster centroids.
//! - [`simlm`]: a nearest-neighbor model that redistributes the Katz back-off
//!   leftover mass according to the distributions of similar objects.
//!
//! Both are compared against the baselines in [`estimators`] using the
//! harnesses in [`eval`].

pub mod cluster;
pub mod corpus;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod similarity;
pub mod simlm;
pub mod synth;

mod serde_float;

pub use corpus::{ContextId, ObjectId, Occurrence, OccurrenceList, PairCounts, Vocabulary};
pub use error::{Error, Result};
pub use estimators::{BackoffModel, BackoffOptions, ConditionalModel, MleModel};
pub use similarity::{LogBase, Measure, NeighborGraph, NeighborParams, SparseDistribution};
pub use simlm::SimBackoffModel;

/// Hex SHA-256 digest, used to tie manifests to the artifacts they describe.
pub fn content_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
