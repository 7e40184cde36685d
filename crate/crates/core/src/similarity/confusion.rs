use crate::corpus::{ObjectId, PairCounts};
use crate::error::{Error, Result};

/// `P_C(x'|x) = sum_y P(x|y) P(x'|y) P(y) / P(x)` with every quantity taken
/// from the maximum-likelihood model of one count table.
///
/// Under MLE this reduces to `sum_y C(x,y) C(x',y) / (C(y) C(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTable {
    rows: Vec<Vec<(ObjectId, f64)>>,
    object_probs: Vec<f64>,
}

impl ConfusionTable {
    pub fn build(counts: &PairCounts) -> Self {
        let columns = counts.columns();
        let total = counts.total() as f64;
        let rows = (0..counts.num_objects() as u32)
            .map(|x| {
                let x = ObjectId(x);
                let cx = counts.object_marginal(x) as f64;
                if cx == 0.0 {
                    return Vec::new();
                }
                let mut acc = vec![0.0; counts.num_objects()];
                let mut touched = Vec::new();
                for &(y, cxy) in counts.row(x) {
                    let cy = counts.context_marginal(y) as f64;
                    let scale = cxy as f64 / (cy * cx);
                    for &(other, c) in &columns[y.index()] {
                        if acc[other.index()] == 0.0 {
                            touched.push(other);
                        }
                        acc[other.index()] += scale * c as f64;
                    }
                }
                touched.sort_unstable();
                touched.into_iter().map(|o| (o, acc[o.index()])).collect()
            })
            .collect();
        let object_probs = counts.object_marginals().iter().map(|&c| c as f64 / total).collect();
        ConfusionTable { rows, object_probs }
    }

    pub fn num_objects(&self) -> usize {
        self.rows.len()
    }

    /// Nonzero entries of row `x`, sorted by object id.
    pub fn row(&self, x: ObjectId) -> &[(ObjectId, f64)] {
        self.rows.get(x.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn prob(&self, x: ObjectId, other: ObjectId) -> f64 {
        let row = self.row(x);
        row.binary_search_by_key(&other, |&(o, _)| o)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    /// MLE `P(x)` of the base table.
    pub fn object_prob(&self, x: ObjectId) -> f64 {
        self.object_probs.get(x.index()).copied().unwrap_or(0.0)
    }

    pub fn is_defined(&self, x: ObjectId) -> bool {
        self.object_prob(x) > 0.0
    }
}

/// Direct evaluation of a single confusion probability.
pub fn confusion_probability(counts: &PairCounts, x: ObjectId, other: ObjectId) -> Result<f64> {
    for id in [x, other] {
        if id.index() >= counts.num_objects() {
            return Err(Error::UnknownObject(id.0));
        }
    }
    let cx = counts.object_marginal(x);
    if cx == 0 {
        return Err(Error::ZeroMarginal(x.0));
    }
    let n = counts.total() as f64;
    let p_x = cx as f64 / n;
    let mut sum = 0.0;
    for &(y, cxy) in counts.row(x) {
        let cy = counts.context_marginal(y) as f64;
        let p_y = cy / n;
        let p_x_given_y = cxy as f64 / cy;
        let p_other_given_y = counts.count(other, y) as f64 / cy;
        sum += p_x_given_y * p_other_given_y * p_y / p_x;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_tokens, IngestOptions};

    fn rose() -> PairCounts {
        ingest_tokens("a rose is a rose is not a nose".as_bytes(), IngestOptions::default())
            .unwrap()
            .counts()
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let c = rose();
        let table = ConfusionTable::build(&c);
        for x in c.usable_objects() {
            let mut sum = 0.0;
            for o in c.usable_objects() {
                let direct = confusion_probability(&c, x, o).unwrap();
                assert!((table.prob(x, o) - direct).abs() < 1e-15);
                sum += direct;
            }
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_normalized_symmetry() {
        let c = rose();
        let t = ConfusionTable::build(&c);
        for x in c.usable_objects() {
            for o in c.usable_objects() {
                let (a, b) = (t.prob(x, o), t.prob(o, x));
                if a > 0.0 {
                    let lhs = a / b;
                    let rhs = t.object_prob(o) / t.object_prob(x);
                    assert!((lhs - rhs).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_marginal_is_an_error() {
        let c = rose().filter_singletons();
        let not = c.object_id("not").unwrap();
        assert!(matches!(
            confusion_probability(&c, not, not),
            Err(Error::ZeroMarginal(_))
        ));
        assert!(matches!(
            confusion_probability(&c, ObjectId(99), not),
            Err(Error::UnknownObject(99))
        ));
    }
}
