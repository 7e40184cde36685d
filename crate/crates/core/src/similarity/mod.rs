//! Distances and similarities between sparse distributions, and the
//! nearest-neighbor graphs built from them.

mod confusion;
mod distance;
mod distribution;
mod neighbors;

pub use confusion::{confusion_probability, ConfusionTable};
pub use distance::{cosine, kendall_tau, kl_divergence, l1_distance, l2_distance, total_divergence_to_mean, LogBase};
pub use distribution::{align, Aligned, SparseDistribution};
pub use neighbors::{
    nearest_neighbors, top_overlap, weight, Measure, Neighbor, NeighborGraph, NeighborParams, NeighborSpace,
};
