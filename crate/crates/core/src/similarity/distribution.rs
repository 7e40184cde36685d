use serde::{Deserialize, Serialize};

use crate::corpus::ContextId;
use crate::error::{Error, Result};

const MASS_TOLERANCE: f64 = 1e-9;

/// A probability mass function over contexts with sparse, strictly positive support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDistribution {
    support: Vec<(ContextId, f64)>,
    mass: f64,
    norm: f64,
}

impl SparseDistribution {
    /// Validates a list of `(context, probability)` entries: ids strictly
    /// increasing after sorting, probabilities positive, mass one within 1e-9.
    pub fn new(mut entries: Vec<(ContextId, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(y, _)| y);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidDistribution(format!("duplicate context {}", w[0].0 .0)));
            }
        }
        if let Some(&(y, p)) = entries.iter().find(|&&(_, p)| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} at context {} is not positive",
                y.0
            )));
        }
        let d = Self::from_sorted_unchecked(entries);
        if (d.mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("mass {} is not 1", d.mass)));
        }
        Ok(d)
    }

    /// Normalizes nonnegative weights into a distribution; zero weights are dropped.
    pub fn from_weights(entries: impl IntoIterator<Item = (ContextId, f64)>) -> Result<Self> {
        let mut entries: Vec<(ContextId, f64)> = entries.into_iter().filter(|&(_, w)| w != 0.0).collect();
        if entries.iter().any(|&(_, w)| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = entries.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        for e in entries.iter_mut() {
            e.1 /= total;
        }
        Self::new(entries)
    }

    /// Builds from entries the caller guarantees are sorted, unique and positive.
    pub(crate) fn from_sorted_unchecked(support: Vec<(ContextId, f64)>) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0].0 < w[1].0));
        let mass = support.iter().map(|&(_, p)| p).sum();
        let norm = support.iter().map(|&(_, p)| p * p).sum::<f64>().sqrt();
        SparseDistribution { support, mass, norm }
    }

    /// Dense probability vector; entry `i` is the probability of context `i`.
    pub fn from_dense(probs: &[f64]) -> Result<Self> {
        Self::new(
            probs
                .iter()
                .enumerate()
                .filter(|&(_, &p)| p != 0.0)
                .map(|(i, &p)| (ContextId(i as u32), p))
                .collect(),
        )
    }

    pub fn support(&self) -> &[(ContextId, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Euclidean norm, precomputed at construction.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn prob(&self, y: ContextId) -> f64 {
        self.support
            .binary_search_by_key(&y, |&(c, _)| c)
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }

    pub fn contexts(&self) -> impl Iterator<Item = ContextId> + '_ {
        self.support.iter().map(|&(y, _)| y)
    }

    /// Dense copy over `n` contexts.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &(y, p) in &self.support {
            v[y.index()] = p;
        }
        v
    }

    /// Entropy in the given base.
    pub fn entropy(&self, base: super::LogBase) -> f64 {
        -self.support.iter().map(|&(_, p)| p * base.log(p)).sum::<f64>()
    }
}

/// One entry of a merge-join over two supports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aligned {
    Both(f64, f64),
    JustFirst(f64),
    JustSecond(f64),
}

/// Merge-join of two sorted supports into the `Both`, `Just1` and `Just2` sets.
pub fn align<'a>(
    q: &'a SparseDistribution,
    r: &'a SparseDistribution,
) -> impl Iterator<Item = (ContextId, Aligned)> + 'a {
    let (a, b) = (q.support(), r.support());
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || match (a.get(i), b.get(j)) {
        (Some(&(ya, pa)), Some(&(yb, pb))) => {
            if ya == yb {
                i += 1;
                j += 1;
                Some((ya, Aligned::Both(pa, pb)))
            } else if ya < yb {
                i += 1;
                Some((ya, Aligned::JustFirst(pa)))
            } else {
                j += 1;
                Some((yb, Aligned::JustSecond(pb)))
            }
        }
        (Some(&(ya, pa)), None) => {
            i += 1;
            Some((ya, Aligned::JustFirst(pa)))
        }
        (None, Some(&(yb, pb))) => {
            j += 1;
            Some((yb, Aligned::JustSecond(pb)))
        }
        (None, None) => None,
    })
}
