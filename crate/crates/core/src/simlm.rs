//! Similarity-based back-off: the leftover mass of an object is spread
//! according to the distributions of its nearest neighbors.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ContextId, ObjectId, PairCounts};
use crate::error::{Error, Result};
use crate::estimators::{check_context, normalizer, BackoffModel, ConditionalModel, Redistribution};
use crate::similarity::{ConfusionTable, Measure, NeighborGraph, NeighborParams, NeighborSpace, SparseDistribution};

/// Which per-object distributions neighbors are compared on and averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborBase {
    /// Unsmoothed relative frequencies.
    Mle,
    /// Katz back-off rows, positive on every context with nonzero unigram mass.
    Backoff,
}

impl NeighborBase {
    /// KL needs smoothed rows to stay finite; the other measures use MLE rows.
    pub fn for_measure(measure: Measure) -> Self {
        if measure.needs_smoothed_base() {
            NeighborBase::Backoff
        } else {
            NeighborBase::Mle
        }
    }
}

impl fmt::Display for NeighborBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborBase::Mle => "mle",
            NeighborBase::Backoff => "backoff",
        })
    }
}

impl FromStr for NeighborBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(NeighborBase::Mle),
            "backoff" => Ok(NeighborBase::Backoff),
            other => Err(Error::InvalidParameter(format!("unknown neighbor base {other:?}"))),
        }
    }
}

pub fn neighbor_distributions(
    counts: &PairCounts,
    backoff: &BackoffModel,
    base: NeighborBase,
) -> Vec<Option<SparseDistribution>> {
    match base {
        NeighborBase::Mle => counts.mle_distributions(),
        NeighborBase::Backoff => backoff.smoothed_distributions(),
    }
}

/// Builds the neighbor graph for `params.measure` over the matching base rows
/// (or the confusion table).
pub fn build_neighbor_graph(
    counts: &PairCounts,
    rows: &[Option<SparseDistribution>],
    params: NeighborParams,
) -> Result<NeighborGraph> {
    if params.measure == Measure::Confusion {
        let table = ConfusionTable::build(counts);
        NeighborGraph::build(NeighborSpace::Confusion(&table), params)
    } else {
        NeighborGraph::build(NeighborSpace::Distributions(rows), params)
    }
}

/// What to do when an object's neighbors put no mass on its unseen contexts,
/// so its leftover mass cannot be redistributed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegeneratePolicy {
    /// Fail the build with a degenerate-redistribution error.
    #[default]
    Error,
    /// Redistribute that object's leftover by the unigram, as plain Katz does.
    Unigram,
}

impl FromStr for DegeneratePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error" => Ok(DegeneratePolicy::Error),
            "unigram" => Ok(DegeneratePolicy::Unigram),
            other => Err(Error::InvalidParameter(format!("unknown degenerate policy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Interpolation weight of the unigram in `P_r`.
    pub gamma: f64,
    pub on_degenerate: DegeneratePolicy,
}

impl SimOptions {
    pub fn new(gamma: f64) -> Self {
        SimOptions {
            gamma,
            on_degenerate: DegeneratePolicy::Error,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma {} outside [0,1]", self.gamma)));
        }
        Ok(())
    }
}

/// Katz back-off whose redistribution model is
/// `P_r(y|x) = gamma P(y) + (1 - gamma) p_sim(y|x)`.
#[derive(Debug, Clone)]
pub struct SimBackoffModel {
    backoff: Arc<BackoffModel>,
    rows: Arc<Vec<Option<SparseDistribution>>>,
    graph: Arc<NeighborGraph>,
    options: SimOptions,
    weight_sums: Vec<f64>,
    alpha: Vec<f64>,
    unigram_fallback: Vec<bool>,
}

impl SimBackoffModel {
    /// `rows` are the neighbor base distributions indexed by object id.
    pub fn new(
        backoff: Arc<BackoffModel>,
        rows: Arc<Vec<Option<SparseDistribution>>>,
        graph: Arc<NeighborGraph>,
        options: SimOptions,
    ) -> Result<Self> {
        options.validate()?;
        let n = backoff.num_objects();
        if graph.num_objects() != n || rows.len() != n {
            return Err(Error::InvalidParameter(format!(
                "back-off model has {n} objects, neighbor graph {}, base rows {}",
                graph.num_objects(),
                rows.len()
            )));
        }
        for x in 0..n {
            for nb in graph.row(ObjectId(x as u32)) {
                if rows.get(nb.id.index()).is_none_or(Option::is_none) {
                    return Err(Error::CorruptState(format!(
                        "neighbor {} of object {x} has no base distribution",
                        nb.id.0
                    )));
                }
            }
        }
        let weight_sums = (0..n)
            .map(|x| graph.row(ObjectId(x as u32)).iter().map(|nb| nb.weight).sum())
            .collect();
        let mut model = SimBackoffModel {
            backoff,
            rows,
            graph,
            options,
            weight_sums,
            alpha: Vec::new(),
            unigram_fallback: vec![false; n],
        };
        model.compute_alphas()?;
        Ok(model)
    }

    fn compute_alphas(&mut self) -> Result<()> {
        let n = self.backoff.num_objects();
        let num_contexts = self.backoff.num_contexts();
        let outcomes: Vec<Result<(f64, bool)>> = (0..n)
            .into_par_iter()
            .map_init(
                || vec![false; num_contexts],
                |seen, x| {
                    let x = ObjectId(x as u32);
                    let mass = self.seen_redistribution_mass(x, seen);
                    match normalizer(x, self.backoff.leftover_mass(x), 1.0 - mass) {
                        Ok(a) => Ok((a, false)),
                        Err(e @ Error::DegenerateRedistribution { .. })
                            if self.options.on_degenerate == DegeneratePolicy::Unigram =>
                        {
                            log::debug!("object {}: {e}; using the unigram", x.0);
                            Ok((self.backoff.alpha(x), true))
                        }
                        Err(e) => Err(e),
                    }
                },
            )
            .collect();
        let mut alpha = Vec::with_capacity(n);
        let mut fallback = Vec::with_capacity(n);
        for o in outcomes {
            let (a, f) = o?;
            alpha.push(a);
            fallback.push(f);
        }
        let fallbacks = fallback.iter().filter(|&&f| f).count();
        if fallbacks > 0 {
            log::warn!("{fallbacks} objects fell back to unigram redistribution");
        }
        self.alpha = alpha;
        self.unigram_fallback = fallback;
        Ok(())
    }

    /// `sum_{y seen with x} P_r(y|x)`. The similarity part is accumulated
    /// neighbor by neighbor against a seen-context mask, which `seen` holds
    /// on return to all `false`.
    fn seen_redistribution_mass(&self, x: ObjectId, seen: &mut [bool]) -> f64 {
        let row = self.backoff.discounted_row(x);
        let unigram: f64 = row.iter().map(|&(y, _)| self.backoff.unigram_prob(y)).sum();
        let total = self.weight_sums[x.index()];
        if !(total > 0.0) {
            return unigram;
        }
        for &(y, _) in row {
            seen[y.index()] = true;
        }
        let mut sim = 0.0;
        for nb in self.graph.row(x) {
            let base = self.rows[nb.id.index()].as_ref().expect("checked at build");
            let on_seen: f64 = base.support().iter().filter(|e| seen[e.0.index()]).map(|e| e.1).sum();
            sim += nb.weight * on_seen;
        }
        for &(y, _) in row {
            seen[y.index()] = false;
        }
        let gamma = self.options.gamma;
        gamma * unigram + (1.0 - gamma) * (sim / total)
    }

    /// Computes base rows and the neighbor graph for `params`, then builds the model.
    pub fn from_counts(
        counts: &PairCounts,
        backoff: Arc<BackoffModel>,
        params: NeighborParams,
        options: SimOptions,
    ) -> Result<Self> {
        let rows = neighbor_distributions(counts, &backoff, NeighborBase::for_measure(params.measure));
        let graph = build_neighbor_graph(counts, &rows, params)?;
        Self::new(backoff, Arc::new(rows), Arc::new(graph), options)
    }

    /// Same neighbors and weights with a different interpolation weight.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let options = SimOptions { gamma, ..self.options };
        options.validate()?;
        let mut model = SimBackoffModel {
            options,
            ..self.clone()
        };
        model.compute_alphas()?;
        Ok(model)
    }

    pub fn backoff(&self) -> &BackoffModel {
        &self.backoff
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    pub fn gamma(&self) -> f64 {
        self.options.gamma
    }

    pub fn options(&self) -> SimOptions {
        self.options
    }

    /// Objects whose leftover mass is spread by the unigram because their
    /// neighbors left nothing on unseen contexts.
    pub fn unigram_fallbacks(&self) -> usize {
        self.unigram_fallback.iter().filter(|&&f| f).count()
    }

    /// Normalizer recomputed against this model's `P_r`.
    pub fn alpha(&self, x: ObjectId) -> f64 {
        self.alpha.get(x.index()).copied().unwrap_or(0.0)
    }

    /// Weighted average of the neighbors' probabilities for `y`, or `None`
    /// when `x` has no neighbor with positive weight.
    pub fn p_sim(&self, x: ObjectId, y: ContextId) -> Option<f64> {
        let total = *self.weight_sums.get(x.index())?;
        if !(total > 0.0) {
            return None;
        }
        let sum: f64 = self
            .graph
            .row(x)
            .iter()
            .map(|nb| {
                let row = self.rows[nb.id.index()].as_ref().expect("checked at build");
                nb.weight * row.prob(y)
            })
            .sum();
        Some(sum / total)
    }

    /// `gamma P(y) + (1 - gamma) p_sim(y|x)`, or `P(y)` without neighbors.
    pub fn p_redistribute(&self, x: ObjectId, y: ContextId) -> f64 {
        let unigram = self.backoff.unigram_prob(y);
        if self.unigram_fallback.get(x.index()).copied().unwrap_or(false) {
            return unigram;
        }
        match self.p_sim(x, y) {
            Some(sim) => self.options.gamma * unigram + (1.0 - self.options.gamma) * sim,
            None => unigram,
        }
    }

    pub fn sim_backoff_prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        self.backoff.check_object(x)?;
        check_context(self.backoff.num_contexts(), y)?;
        Ok(match self.backoff.discounted(x, y) {
            Some(p) => p,
            None => self.alpha(x) * self.p_redistribute(x, y),
        })
    }

    pub fn manifest(&self, backoff_hash: String, graph_hash: String) -> SimManifest {
        let p = &self.graph.params;
        SimManifest {
            measure: p.measure,
            k: p.k,
            threshold: p.threshold,
            beta: p.beta,
            gamma: self.options.gamma,
            on_degenerate: self.options.on_degenerate,
            ln_base: p.log_base.ln_base(),
            neighbor_base: NeighborBase::for_measure(p.measure),
            backoff_hash,
            graph_hash,
        }
    }
}

impl Redistribution for SimBackoffModel {
    fn redistribute(&self, x: ObjectId, y: ContextId) -> f64 {
        self.p_redistribute(x, y)
    }
}

impl ConditionalModel for SimBackoffModel {
    fn prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        self.sim_backoff_prob(x, y)
    }

    fn num_contexts(&self) -> usize {
        self.backoff.num_contexts()
    }
}

/// Everything needed to rebuild a similarity model from its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimManifest {
    pub measure: Measure,
    pub k: usize,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub beta: f64,
    pub gamma: f64,
    pub on_degenerate: DegeneratePolicy,
    pub ln_base: f64,
    pub neighbor_base: NeighborBase,
    pub backoff_hash: String,
    pub graph_hash: String,
}
