//! Distance functions between sparse distributions.
//!
//! Every function here runs a single merge-join over the two supports and
//! never touches contexts outside their union.

use serde::{Deserialize, Serialize};

use super::distribution::{align, Aligned, SparseDistribution};
use crate::error::{Error, Result};

/// Base of the logarithm used by divergences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBase {
    ln_base: f64,
}

impl LogBase {
    pub const NATURAL: LogBase = LogBase { ln_base: 1.0 };
    pub const TEN: LogBase = LogBase {
        ln_base: std::f64::consts::LN_10,
    };
    pub const TWO: LogBase = LogBase {
        ln_base: std::f64::consts::LN_2,
    };

    pub fn new(base: f64) -> Result<Self> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "logarithm base must be finite and > 1, got {base}"
            )));
        }
        Ok(LogBase { ln_base: base.ln() })
    }

    /// Builds from `ln b` directly, which round-trips exactly through text.
    pub fn from_ln(ln_base: f64) -> Result<Self> {
        if !(ln_base > 0.0 && ln_base.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "logarithm base must be finite and > 1, got ln b = {ln_base}"
            )));
        }
        Ok(LogBase { ln_base })
    }

    /// `ln b`.
    pub fn ln_base(self) -> f64 {
        self.ln_base
    }

    pub fn base(self) -> f64 {
        self.ln_base.exp()
    }

    #[inline]
    pub fn log(self, x: f64) -> f64 {
        if self.ln_base == 1.0 {
            x.ln()
        } else {
            x.ln() / self.ln_base
        }
    }

    /// `b^x`.
    #[inline]
    pub fn pow(self, x: f64) -> f64 {
        if self.ln_base == 1.0 {
            x.exp()
        } else {
            (x * self.ln_base).exp()
        }
    }
}

impl Default for LogBase {
    fn default() -> Self {
        LogBase::TEN
    }
}

/// `D(q || r)`; `+inf` when `q` puts mass where `r` has none.
pub fn kl_divergence(q: &SparseDistribution, r: &SparseDistribution, base: LogBase) -> f64 {
    let mut sum = 0.0;
    for (_, a) in align(q, r) {
        match a {
            Aligned::Both(pq, pr) => sum += pq * base.log(pq / pr),
            Aligned::JustFirst(_) => return f64::INFINITY,
            Aligned::JustSecond(_) => {}
        }
    }
    sum.max(0.0)
}

/// Total divergence to the mean `A(q,r) = D(q||m) + D(r||m)`, `m = (q+r)/2`,
/// evaluated over the shared support only.
pub fn total_divergence_to_mean(q: &SparseDistribution, r: &SparseDistribution, base: LogBase) -> f64 {
    let max = 2.0 * base.log(2.0);
    let mut both = 0.0;
    for (_, a) in align(q, r) {
        if let Aligned::Both(pq, pr) = a {
            let s = pq + pr;
            both += pq * base.log(pq / s) + pr * base.log(pr / s);
        }
    }
    (max + both).clamp(0.0, max)
}

/// `L1(q,r)`, evaluated over the shared support only.
pub fn l1_distance(q: &SparseDistribution, r: &SparseDistribution) -> f64 {
    let mut both = 0.0;
    for (_, a) in align(q, r) {
        if let Aligned::Both(pq, pr) = a {
            both += (pq - pr).abs() - pq - pr;
        }
    }
    (2.0 + both).clamp(0.0, 2.0)
}

/// Euclidean distance.
pub fn l2_distance(q: &SparseDistribution, r: &SparseDistribution) -> f64 {
    align(q, r)
        .map(|(_, a)| match a {
            Aligned::Both(pq, pr) => (pq - pr) * (pq - pr),
            Aligned::JustFirst(p) | Aligned::JustSecond(p) => p * p,
        })
        .sum::<f64>()
        .sqrt()
}

/// Cosine of the angle between `q` and `r`, using the precomputed norms.
pub fn cosine(q: &SparseDistribution, r: &SparseDistribution) -> Result<f64> {
    let denom = q.norm() * r.norm();
    if !(denom > 0.0) {
        return Err(Error::InvalidDistribution("zero-norm distribution".into()));
    }
    let dot: f64 = align(q, r)
        .map(|(_, a)| match a {
            Aligned::Both(pq, pr) => pq * pr,
            _ => 0.0,
        })
        .sum();
    Ok((dot / denom).min(1.0))
}

/// Kendall's tau between `q` and `r` over a context set of size `universe`.
///
/// Only the union of the supports is sorted. Every pair made of a context in
/// the union and one outside it is a concordance when the first lies in both
/// supports and a tie otherwise, so those pairs are added in closed form.
pub fn kendall_tau(q: &SparseDistribution, r: &SparseDistribution, universe: usize) -> Result<f64> {
    if universe < 2 {
        return Err(Error::InvalidParameter(format!(
            "Kendall tau needs at least 2 contexts, got {universe}"
        )));
    }
    let mut points: Vec<(f64, f64)> = align(q, r)
        .map(|(_, a)| match a {
            Aligned::Both(pq, pr) => (pq, pr),
            Aligned::JustFirst(p) => (p, 0.0),
            Aligned::JustSecond(p) => (0.0, p),
        })
        .collect();
    let restricted = points.len();
    if restricted > universe {
        return Err(Error::InvalidParameter(format!(
            "union support ({restricted}) exceeds context set size ({universe})"
        )));
    }
    let both = points.iter().filter(|&&(a, b)| a > 0.0 && b > 0.0).count() as i128;
    let inner = concordance_balance(&mut points);
    let straddle = both * (universe - restricted) as i128;
    let pairs = (universe as i128) * (universe as i128 - 1) / 2;
    Ok((inner + straddle) as f64 / pairs as f64)
}

/// `#concordances - #discordances` among `points`, in `O(n log n)`.
fn concordance_balance(points: &mut [(f64, f64)]) -> i128 {
    let n = points.len() as i128;
    if n < 2 {
        return 0;
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let choose2 = |t: i128| t * (t - 1) / 2;

    let mut tied_first = 0i128;
    let mut tied_joint = 0i128;
    let mut i = 0;
    while i < points.len() {
        let mut j = i;
        while j < points.len() && points[j].0 == points[i].0 {
            j += 1;
        }
        tied_first += choose2((j - i) as i128);
        let mut k = i;
        while k < j {
            let mut l = k;
            while l < j && points[l].1 == points[k].1 {
                l += 1;
            }
            tied_joint += choose2((l - k) as i128);
            k = l;
        }
        i = j;
    }

    let mut seconds: Vec<f64> = points.iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut seconds);
    seconds.sort_by(f64::total_cmp);
    let mut tied_second = 0i128;
    let mut i = 0;
    while i < seconds.len() {
        let mut j = i;
        while j < seconds.len() && seconds[j] == seconds[i] {
            j += 1;
        }
        tied_second += choose2((j - i) as i128);
        i = j;
    }
    choose2(n) - tied_first - tied_second + tied_joint - 2 * discordant
}

/// Number of pairs `i < j` with `v[i] > v[j]`; sorts `v` as a side effect.
fn count_inversions(v: &mut [f64]) -> i128 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as i128;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    inv
}
