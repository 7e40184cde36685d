use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::PairCounts;

/// Counts-of-counts and the discounted counts `C*` derived from them.
///
/// Below the ceiling `C*(c) = (c+1) n_{c+1} / n_c`, except that it falls back
/// to `c` when `n_c` or `n_{c+1}` is zero, is capped at `c`, and is made
/// non-decreasing in `c`. At or above the ceiling counts are kept as they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodTuringTable {
    counts_of_counts: BTreeMap<u64, u64>,
    ceiling: u64,
    unseen: u64,
    discounted: Vec<f64>,
}

impl GoodTuringTable {
    /// Table over the pairs of `counts`. `unseen` is `n_0`, the number of
    /// possible but unobserved pairs.
    pub fn new(counts_of_counts: BTreeMap<u64, u64>, ceiling: u64, unseen: u64) -> Self {
        let n = |m: u64| counts_of_counts.get(&m).copied().unwrap_or(0);
        let mut discounted = vec![0.0; ceiling.max(1) as usize];
        for c in 1..ceiling {
            let (nc, next) = (n(c), n(c + 1));
            let raw = if nc == 0 || next == 0 {
                if nc > 0 {
                    log::debug!("Good-Turing: n_{} = 0, keeping count {c} undiscounted", c + 1);
                }
                c as f64
            } else {
                ((c + 1) as f64 * next as f64 / nc as f64).min(c as f64)
            };
            discounted[c as usize] = raw.max(discounted[c as usize - 1]);
        }
        GoodTuringTable {
            counts_of_counts,
            ceiling,
            unseen,
            discounted,
        }
    }

    pub fn from_counts(counts: &PairCounts, ceiling: u64) -> Self {
        let possible = counts.usable_objects().count() as u64 * counts.usable_contexts().count() as u64;
        let unseen = possible.saturating_sub(counts.distinct_pairs() as u64);
        Self::new(counts.counts_of_counts(), ceiling, unseen)
    }

    /// `n_m`.
    pub fn n(&self, m: u64) -> u64 {
        if m == 0 {
            return self.unseen;
        }
        self.counts_of_counts.get(&m).copied().unwrap_or(0)
    }

    pub fn ceiling(&self) -> u64 {
        self.ceiling
    }

    /// Discounted count `C*(c)` for `c >= 1`.
    pub fn discount(&self, c: u64) -> f64 {
        if c == 0 {
            return 0.0;
        }
        if c >= self.ceiling {
            return c as f64;
        }
        self.discounted[c as usize]
    }

    /// The unmodified Good-Turing estimate `(c+1) n_{c+1} / n_c`, if defined.
    pub fn raw_estimate(&self, c: u64) -> Option<f64> {
        let nc = self.n(c);
        (nc > 0).then(|| (c + 1) as f64 * self.n(c + 1) as f64 / nc as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(pairs: &[(u64, u64)], ceiling: u64) -> GoodTuringTable {
        GoodTuringTable::new(pairs.iter().copied().collect(), ceiling, 0)
    }

    #[test]
    fn rose_table() {
        // n_1 = 4, n_2 = 2
        let t = table(&[(1, 4), (2, 2)], 5);
        assert_eq!(t.discount(1), 1.0);
        assert_eq!(t.discount(2), 2.0);
        assert_eq!(t.discount(7), 7.0);
    }

    #[test]
    fn ceiling_keeps_counts() {
        let t = table(&[(1, 10), (2, 3), (3, 1)], 2);
        assert_eq!(t.discount(1), 0.6);
        assert_eq!(t.discount(2), 2.0);
        assert_eq!(t.discount(3), 3.0);
    }

    #[test]
    fn quarter_ratio_halves_singletons() {
        let t = table(&[(1, 8), (2, 2)], 5);
        assert_eq!(t.discount(1), 0.5);
    }

    #[test]
    fn discounts_never_inflate_and_stay_monotone() {
        // raw estimates: C*(1) = 2*9/3 = 6 > 1, C*(2) = 3*1/9, C*(3) = 4*5/1 > 3
        let t = table(&[(1, 3), (2, 9), (3, 1), (4, 5)], 5);
        assert_eq!(t.discount(1), 1.0);
        assert_eq!(t.discount(2), 1.0);
        assert_eq!(t.discount(3), 3.0);
        for c in 1..10 {
            assert!(t.discount(c) <= c as f64);
            assert!(t.discount(c + 1) >= t.discount(c));
        }
    }
}
