use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{check_context, ConditionalModel, GoodTuringTable};
use crate::corpus::{ContextId, ObjectId, PairCounts};
use crate::error::{Error, Result};
use crate::similarity::SparseDistribution;

/// Probability redistribution model `P_r(y|x)` for unseen pairs.
pub trait Redistribution: Sync {
    fn redistribute(&self, x: ObjectId, y: ContextId) -> f64;
}

/// Katz's choice `P_r(y|x) = P(y)`.
#[derive(Debug, Clone, Copy)]
pub struct UnigramRedistribution<'a>(pub &'a [f64]);

impl Redistribution for UnigramRedistribution<'_> {
    fn redistribute(&self, _x: ObjectId, y: ContextId) -> f64 {
        self.0[y.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffOptions {
    /// Counts at or above this value are not discounted.
    pub ceiling: u64,
    /// Treat pairs seen once as unseen. Object and context marginals still
    /// include them; counts-of-counts are taken over the remaining pairs.
    pub singletons_as_unseen: bool,
}

impl Default for BackoffOptions {
    fn default() -> Self {
        BackoffOptions {
            ceiling: 5,
            singletons_as_unseen: false,
        }
    }
}

const MODEL_FORMAT: &str = "distsim-backoff";
const MODEL_VERSION: u32 = 1;

/// Unseen mass at or below this is treated as an underflow when computing `alpha`.
pub(crate) const UNSEEN_MASS_FLOOR: f64 = 1e-12;

/// Katz back-off: Good-Turing discounted estimates for seen pairs and
/// `alpha(x) P_r(y|x)` for unseen ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackoffModel {
    options: BackoffOptions,
    good_turing: GoodTuringTable,
    discounted: Vec<Vec<(ContextId, f64)>>,
    leftover: Vec<f64>,
    alpha: Vec<f64>,
    unigram: Vec<f64>,
    object_marginals: Vec<u64>,
}

impl BackoffModel {
    pub fn build(counts: &PairCounts, options: BackoffOptions) -> Result<Self> {
        if options.ceiling < 1 {
            return Err(Error::InvalidParameter("discount ceiling must be at least 1".into()));
        }
        if counts.total() == 0 {
            return Err(Error::EmptyCorpus);
        }
        let seen_table;
        let seen = if options.singletons_as_unseen {
            seen_table = counts.filter_singletons();
            &seen_table
        } else {
            counts
        };
        let good_turing = GoodTuringTable::from_counts(seen, options.ceiling);

        let total = counts.total() as f64;
        let unigram: Vec<f64> = counts.context_marginals().iter().map(|&c| c as f64 / total).collect();
        let object_marginals = counts.object_marginals().to_vec();

        let usable_contexts = counts.usable_contexts().count();
        let mut discounted = Vec::with_capacity(counts.num_objects());
        let mut leftover = Vec::with_capacity(counts.num_objects());
        for (x, &cx) in object_marginals.iter().enumerate() {
            if cx == 0 {
                discounted.push(Vec::new());
                leftover.push(0.0);
                continue;
            }
            let mut row: Vec<(ContextId, f64)> = seen
                .row(ObjectId(x as u32))
                .iter()
                .map(|&(y, c)| (y, good_turing.discount(c) / cx as f64))
                .collect();
            let seen_mass: f64 = row.iter().map(|&(_, p)| p).sum();
            if row.len() == usable_contexts {
                // no unseen context could take the leftover, so keep the row whole
                log::debug!("object {x} occurs with every context; its discounted row is rescaled");
                for (_, p) in row.iter_mut() {
                    *p /= seen_mass;
                }
                leftover.push(0.0);
            } else {
                leftover.push((1.0 - seen_mass).clamp(0.0, 1.0));
            }
            discounted.push(row);
        }

        let mut model = BackoffModel {
            options,
            good_turing,
            discounted,
            leftover,
            alpha: Vec::new(),
            unigram,
            object_marginals,
        };
        let unigram = model.unigram.clone();
        model.alpha = model.alphas_for(&UnigramRedistribution(&unigram))?;
        Ok(model)
    }

    /// `alpha(x) = leftover(x) / (1 - sum_{y seen with x} P_r(y|x))` for every object.
    pub fn alphas_for<R: Redistribution + ?Sized>(&self, redistribution: &R) -> Result<Vec<f64>> {
        (0..self.num_objects())
            .map(|x| {
                let x = ObjectId(x as u32);
                let seen_mass = self.seen_redistribution_mass(x, redistribution);
                normalizer(x, self.leftover_mass(x), 1.0 - seen_mass)
            })
            .collect()
    }

    /// `sum_{y seen with x} P_r(y|x)`, summed in context order.
    pub fn seen_redistribution_mass<R: Redistribution + ?Sized>(&self, x: ObjectId, redistribution: &R) -> f64 {
        self.discounted_row(x)
            .iter()
            .map(|&(y, _)| redistribution.redistribute(x, y))
            .sum()
    }

    pub fn options(&self) -> BackoffOptions {
        self.options
    }

    pub fn good_turing(&self) -> &GoodTuringTable {
        &self.good_turing
    }

    pub fn num_objects(&self) -> usize {
        self.object_marginals.len()
    }

    pub fn num_contexts(&self) -> usize {
        self.unigram.len()
    }

    pub fn is_usable(&self, x: ObjectId) -> bool {
        self.object_marginals.get(x.index()).is_some_and(|&c| c > 0)
    }

    pub(crate) fn check_object(&self, x: ObjectId) -> Result<()> {
        if x.index() >= self.num_objects() {
            return Err(Error::UnknownObject(x.0));
        }
        if !self.is_usable(x) {
            return Err(Error::ZeroMarginal(x.0));
        }
        Ok(())
    }

    /// Seen contexts of `x` with their discounted probabilities.
    pub fn discounted_row(&self, x: ObjectId) -> &[(ContextId, f64)] {
        self.discounted.get(x.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `P_d(y|x)` if the pair counts as seen.
    pub fn discounted(&self, x: ObjectId, y: ContextId) -> Option<f64> {
        let row = self.discounted_row(x);
        row.binary_search_by_key(&y, |&(c, _)| c).ok().map(|i| row[i].1)
    }

    /// Leftover mass for unseen contexts of `x`.
    pub fn leftover_mass(&self, x: ObjectId) -> f64 {
        self.leftover.get(x.index()).copied().unwrap_or(0.0)
    }

    /// Normalizer for the unigram redistribution.
    pub fn alpha(&self, x: ObjectId) -> f64 {
        self.alpha.get(x.index()).copied().unwrap_or(0.0)
    }

    pub fn unigram(&self) -> &[f64] {
        &self.unigram
    }

    pub fn unigram_prob(&self, y: ContextId) -> f64 {
        self.unigram.get(y.index()).copied().unwrap_or(0.0)
    }

    /// `P_BO(y|x)`.
    pub fn katz_prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        self.check_object(x)?;
        check_context(self.num_contexts(), y)?;
        Ok(match self.discounted(x, y) {
            Some(p) => p,
            None => self.alpha(x) * self.unigram[y.index()],
        })
    }

    /// The full smoothed row `P_BO(·|x)` as a distribution, `None` for unusable objects.
    pub fn smoothed_distribution(&self, x: ObjectId) -> Option<SparseDistribution> {
        if !self.is_usable(x) {
            return None;
        }
        let alpha = self.alpha(x);
        let row = self.discounted_row(x);
        let mut entries = Vec::with_capacity(self.num_contexts());
        let mut next = row.iter().peekable();
        for (y, &pu) in self.unigram.iter().enumerate() {
            let y = ContextId(y as u32);
            let p = match next.peek() {
                Some(&&(s, pd)) if s == y => {
                    next.next();
                    pd
                }
                _ => alpha * pu,
            };
            if p > 0.0 {
                entries.push((y, p));
            }
        }
        Some(SparseDistribution::from_sorted_unchecked(entries))
    }

    pub fn smoothed_distributions(&self) -> Vec<Option<SparseDistribution>> {
        (0..self.num_objects() as u32)
            .map(|x| self.smoothed_distribution(ObjectId(x)))
            .collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(
            out,
            &ModelWire {
                format: MODEL_FORMAT.into(),
                version: MODEL_VERSION,
                model: self.clone(),
            },
        )?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let wire: ModelWire = serde_json::from_reader(input)?;
        if wire.format != MODEL_FORMAT || wire.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                wire.format, wire.version
            )));
        }
        Ok(wire.model)
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_json(&mut buf).expect("in-memory serialization");
        buf
    }
}

#[derive(Serialize, Deserialize)]
struct ModelWire {
    format: String,
    version: u32,
    model: BackoffModel,
}

/// `alpha = leftover / unseen_mass`, zero when nothing is left over.
pub(crate) fn normalizer(x: ObjectId, leftover: f64, unseen_mass: f64) -> Result<f64> {
    if leftover == 0.0 {
        return Ok(0.0);
    }
    if unseen_mass <= UNSEEN_MASS_FLOOR {
        return Err(Error::DegenerateRedistribution {
            object: x.0,
            leftover,
            unseen_mass,
        });
    }
    Ok(leftover / unseen_mass)
}

impl ConditionalModel for BackoffModel {
    fn prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        self.katz_prob(x, y)
    }

    fn num_contexts(&self) -> usize {
        self.unigram.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_pairs, ingest_tokens, IngestOptions};
    use crate::estimators::conditional_mass;

    fn rose() -> PairCounts {
        ingest_tokens("a rose is a rose is not a nose".as_bytes(), IngestOptions::default())
            .unwrap()
            .counts()
    }

    #[test]
    fn rose_values() {
        let c = rose();
        let m = BackoffModel::build(&c, BackoffOptions::default()).unwrap();
        let is = c.object_id("is").unwrap();
        let a_ctx = c.context_id("a").unwrap();
        assert_eq!(m.katz_prob(is, a_ctx).unwrap(), 0.5);
        assert_eq!(m.leftover_mass(is), 0.0);
        assert_eq!(m.katz_prob(is, c.context_id("rose").unwrap()).unwrap(), 0.0);
        assert_eq!(m.leftover_mass(c.object_id("a").unwrap()), 0.0);
        for x in c.usable_objects() {
            assert!((conditional_mass(&m, x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn undiscounted_objects_have_no_leftover() {
        let c = ingest_pairs("x\tu\t5\nx\tv\t6\ny\tu\t1\n".as_bytes(), IngestOptions::default()).unwrap();
        let m = BackoffModel::build(&c, BackoffOptions::default()).unwrap();
        assert_eq!(m.leftover_mass(c.object_id("x").unwrap()), 0.0);
    }

    #[test]
    fn halved_singletons() {
        // n_1 = 8, n_2 = 2: C*(1) = 2 * 2 / 8 = 1/2
        let mut text = String::new();
        for i in 0..8 {
            text.push_str(&format!("x\ts{i}\n"));
        }
        text.push_str("x\td0\t2\ny\td1\t2\nz\tw\t7\n");
        let c = ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap();
        let m = BackoffModel::build(&c, BackoffOptions::default()).unwrap();
        let x = c.object_id("x").unwrap();
        let cx = c.object_marginal(x) as f64;
        for i in 0..8 {
            let y = c.context_id(&format!("s{i}")).unwrap();
            assert_eq!(m.discounted(x, y).unwrap(), 0.5 / cx);
        }
        let expected = 8.0 * (1.0 / cx) / 2.0;
        assert!((m.leftover_mass(x) - expected).abs() < 1e-15);
        assert!((conditional_mass(&m, x).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_mass_follows_unigram() {
        let mut text = String::new();
        for i in 0..6 {
            text.push_str(&format!("x\tc{i}\n"));
        }
        text.push_str("y\tc1\t2\ny\tc7\t2\nz\tc9\t3\n");
        let c = ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap();
        let m = BackoffModel::build(&c, BackoffOptions::default()).unwrap();
        let x = c.object_id("x").unwrap();
        assert!(m.leftover_mass(x) > 0.0);
        for y in c.usable_contexts() {
            if c.count(x, y) == 0 {
                let ratio = m.katz_prob(x, y).unwrap() / m.unigram_prob(y);
                assert!((ratio - m.alpha(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singleton_mode_moves_mass_to_leftover() {
        let mut text = String::new();
        for i in 0..5 {
            text.push_str(&format!("x\tc{i}\n"));
        }
        text.push_str("x\td\t6\ny\td\t2\ny\tc0\t2\nz\tc9\t1\n");
        let c = ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap();
        let opts = BackoffOptions {
            singletons_as_unseen: true,
            ..Default::default()
        };
        let m = BackoffModel::build(&c, opts).unwrap();
        let x = c.object_id("x").unwrap();
        assert!(m.discounted(x, c.context_id("c1").unwrap()).is_none());
        assert!((m.leftover_mass(x) - 5.0 / 11.0).abs() < 1e-15);
        // z has only a singleton, so every context is unseen for it
        let z = c.object_id("z").unwrap();
        assert_eq!(m.leftover_mass(z), 1.0);
        for x in c.usable_objects() {
            assert!((conditional_mass(&m, x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_redistribution() {
        struct SeenOnly;
        impl Redistribution for SeenOnly {
            fn redistribute(&self, _x: ObjectId, y: ContextId) -> f64 {
                if y.0 < 8 {
                    1.0 / 8.0
                } else {
                    0.0
                }
            }
        }
        let mut text = String::new();
        for i in 0..8 {
            text.push_str(&format!("x\tc{i}\n"));
        }
        text.push_str("x\tc8\t2\ny\tc8\t2\n");
        // x has seen every context, so its discounted row is rescaled instead
        let c = ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap();
        let m = BackoffModel::build(&c, BackoffOptions::default()).unwrap();
        let x = c.object_id("x").unwrap();
        assert_eq!(m.leftover_mass(x), 0.0);
        assert!((conditional_mass(&m, x).unwrap() - 1.0).abs() < 1e-12);
        assert!(m.prob(x, c.context_id("c8").unwrap()).unwrap() > m.prob(x, c.context_id("c0").unwrap()).unwrap());

        text.push_str("y\tc9\t2\n");
        let c = ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap();
        let m = BackoffModel::build(&c, BackoffOptions::default()).unwrap();
        assert!(m.leftover_mass(c.object_id("x").unwrap()) > 0.0);
        assert!(matches!(
            m.alphas_for(&SeenOnly),
            Err(Error::DegenerateRedistribution { .. })
        ));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut text = String::new();
        for i in 0..30 {
            text.push_str(&format!("o{}\tc{}\t{}\n", i % 7, (i * 5) % 11, 1 + i % 4));
        }
        let c = ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap();
        let m = BackoffModel::build(&c, BackoffOptions::default()).unwrap();
        let back = BackoffModel::read_json(m.to_json_bytes().as_slice()).unwrap();
        assert_eq!(back, m);
        for x in c.usable_objects() {
            assert_eq!(back.alpha(x).to_bits(), m.alpha(x).to_bits());
            assert_eq!(back.leftover_mass(x).to_bits(), m.leftover_mass(x).to_bits());
        }
    }
}
