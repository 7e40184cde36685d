//! Baseline conditional estimators over a count table.

mod backoff;
mod good_turing;

pub(crate) use backoff::normalizer;
pub use backoff::{BackoffModel, BackoffOptions, Redistribution, UnigramRedistribution};
pub use good_turing::GoodTuringTable;

use crate::corpus::{ContextId, ObjectId, PairCounts};
use crate::error::{Error, Result};

/// A conditional model `P(y|x)` over a fixed context set.
pub trait ConditionalModel: Sync {
    fn prob(&self, x: ObjectId, y: ContextId) -> Result<f64>;

    /// Size of the context set the model is normalized over.
    fn num_contexts(&self) -> usize;
}

impl<M: ConditionalModel + ?Sized> ConditionalModel for &M {
    fn prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        (**self).prob(x, y)
    }

    fn num_contexts(&self) -> usize {
        (**self).num_contexts()
    }
}

pub(crate) fn check_object(counts: &PairCounts, x: ObjectId) -> Result<()> {
    if x.index() >= counts.num_objects() {
        return Err(Error::UnknownObject(x.0));
    }
    if counts.object_marginal(x) == 0 {
        return Err(Error::ZeroMarginal(x.0));
    }
    Ok(())
}

pub fn check_context(num_contexts: usize, y: ContextId) -> Result<()> {
    if y.index() >= num_contexts {
        return Err(Error::UnknownContext(y.0));
    }
    Ok(())
}

/// `P_MLE(y|x) = C(x,y) / C(x)`.
pub fn mle_conditional(counts: &PairCounts, x: ObjectId, y: ContextId) -> Result<f64> {
    check_object(counts, x)?;
    check_context(counts.num_contexts(), y)?;
    Ok(counts.count(x, y) as f64 / counts.object_marginal(x) as f64)
}

/// `P_MLE(y) = C(y) / N`.
pub fn mle_unigram(counts: &PairCounts, y: ContextId) -> f64 {
    counts.context_marginal(y) as f64 / counts.total() as f64
}

/// The unsmoothed maximum-likelihood model.
#[derive(Debug, Clone, Copy)]
pub struct MleModel<'a> {
    counts: &'a PairCounts,
}

impl<'a> MleModel<'a> {
    pub fn new(counts: &'a PairCounts) -> Self {
        MleModel { counts }
    }

    pub fn counts(&self) -> &'a PairCounts {
        self.counts
    }
}

impl ConditionalModel for MleModel<'_> {
    fn prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        mle_conditional(self.counts, x, y)
    }

    fn num_contexts(&self) -> usize {
        self.counts.num_contexts()
    }
}

/// Context unigram `P(y)`, ignoring the conditioning object.
#[derive(Debug, Clone)]
pub struct UnigramModel {
    probs: Vec<f64>,
}

impl UnigramModel {
    pub fn new(counts: &PairCounts) -> Self {
        UnigramModel {
            probs: (0..counts.num_contexts() as u32)
                .map(|y| mle_unigram(counts, ContextId(y)))
                .collect(),
        }
    }
}

impl ConditionalModel for UnigramModel {
    fn prob(&self, _x: ObjectId, y: ContextId) -> Result<f64> {
        check_context(self.probs.len(), y)?;
        Ok(self.probs[y.index()])
    }

    fn num_contexts(&self) -> usize {
        self.probs.len()
    }
}

/// Step function of the object count: `lambda(x) = weight of the last bucket
/// whose lower bound is <= C(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSchedule {
    buckets: Vec<(u64, f64)>,
}

impl LambdaSchedule {
    pub fn constant(lambda: f64) -> Result<Self> {
        Self::buckets(vec![(0, lambda)])
    }

    /// `buckets` are `(minimum object count, lambda)`; the first bound must be 0.
    pub fn buckets(mut buckets: Vec<(u64, f64)>) -> Result<Self> {
        buckets.sort_by_key(|&(b, _)| b);
        if buckets.first().map(|&(b, _)| b) != Some(0) {
            return Err(Error::InvalidParameter(
                "lambda schedule must start with a bucket at count 0".into(),
            ));
        }
        if let Some(&(_, l)) = buckets.iter().find(|&&(_, l)| !(0.0..=1.0).contains(&l)) {
            return Err(Error::InvalidParameter(format!("lambda {l} outside [0,1]")));
        }
        Ok(LambdaSchedule { buckets })
    }

    pub fn lambda(&self, object_count: u64) -> f64 {
        let i = self.buckets.partition_point(|&(b, _)| b <= object_count);
        self.buckets[i - 1].1
    }
}

/// Jelinek-Mercer interpolation of the conditional MLE with the context unigram.
#[derive(Debug, Clone)]
pub struct JelinekMercer<'a> {
    counts: &'a PairCounts,
    lambda: LambdaSchedule,
}

impl<'a> JelinekMercer<'a> {
    pub fn new(counts: &'a PairCounts, lambda: LambdaSchedule) -> Self {
        JelinekMercer { counts, lambda }
    }
}

impl ConditionalModel for JelinekMercer<'_> {
    fn prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        let cond = mle_conditional(self.counts, x, y)?;
        let l = self.lambda.lambda(self.counts.object_marginal(x));
        Ok(l * cond + (1.0 - l) * mle_unigram(self.counts, y))
    }

    fn num_contexts(&self) -> usize {
        self.counts.num_contexts()
    }
}

/// `sum_y P(y|x)` over the model's whole context set.
pub fn conditional_mass<M: ConditionalModel + ?Sized>(model: &M, x: ObjectId) -> Result<f64> {
    (0..model.num_contexts() as u32)
        .map(|y| model.prob(x, ContextId(y)))
        .sum()
}
