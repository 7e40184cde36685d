//! Held-out experiment setup shared by the evaluation commands.

use std::sync::Arc;

use distsim::corpus::{split_corpus, CrossValidation, SplitOptions};
use distsim::eval::{pseudoword_cases, PseudowordCase, PseudowordMap, SimFactory, SimPoint};
use distsim::simlm::{build_neighbor_graph, neighbor_distributions, DegeneratePolicy, NeighborBase, SimOptions};
use distsim::{
    BackoffModel, BackoffOptions, LogBase, Measure, NeighborParams, OccurrenceList, PairCounts, SimBackoffModel,
};

use crate::error::Result;
use crate::{BackoffArgs, SimArgs, SplitArgs};

/// One occurrence per counted event, with the table's own ids.
pub fn occurrences_of(counts: &PairCounts) -> OccurrenceList {
    let mut list = OccurrenceList {
        objects: counts.objects().clone(),
        contexts: counts.contexts().clone(),
        occurrences: Vec::with_capacity(counts.total() as usize),
    };
    for (x, y, c) in counts.iter_pairs() {
        list.occurrences.extend(std::iter::repeat_n((x, y), c as usize));
    }
    list
}

impl BackoffArgs {
    pub fn options(&self) -> BackoffOptions {
        BackoffOptions {
            ceiling: self.ceiling,
            singletons_as_unseen: self.drop_singletons,
        }
    }
}

/// The table neighbors are computed on: singletons go when the back-off model ignores them.
pub fn neighbor_counts(counts: &PairCounts, backoff: &BackoffModel) -> PairCounts {
    if backoff.options().singletons_as_unseen {
        counts.filter_singletons()
    } else {
        counts.clone()
    }
}

impl SimArgs {
    pub fn point(&self, num_objects: usize) -> SimPoint {
        SimPoint {
            k: self.k.unwrap_or(num_objects),
            threshold: self.threshold,
            beta: self.beta,
            gamma: self.gamma,
        }
    }

    pub fn neighbor_params(&self, num_objects: usize) -> Result<NeighborParams> {
        Ok(NeighborParams {
            measure: self.measure,
            k: self.k.unwrap_or(num_objects),
            threshold: self.threshold,
            beta: self.beta,
            log_base: LogBase::new(self.log_base)?,
        })
    }
}

/// Builds the similarity model on `counts` (the table `backoff` was trained on).
pub fn build_sim(
    counts: &PairCounts,
    backoff: Arc<BackoffModel>,
    sim: &SimArgs,
    on_degenerate: DegeneratePolicy,
) -> Result<SimBackoffModel> {
    let table = neighbor_counts(counts, &backoff);
    let rows = neighbor_distributions(&table, &backoff, NeighborBase::for_measure(sim.measure));
    let graph = build_neighbor_graph(&table, &rows, sim.neighbor_params(counts.num_objects())?)?;
    let options = SimOptions {
        gamma: sim.gamma,
        on_degenerate,
    };
    Ok(SimBackoffModel::new(backoff, Arc::new(rows), Arc::new(graph), options)?)
}

/// A training table with held-out folds and the Katz model trained on it.
pub struct Experiment {
    pub cv: CrossValidation,
    pub backoff: Arc<BackoffModel>,
}

impl Experiment {
    pub fn prepare(counts: &PairCounts, split: &SplitArgs, backoff: &BackoffArgs, seed: u64) -> Result<Self> {
        let opts = SplitOptions {
            folds: split.folds,
            seed,
            unseen_only: !split.all_pairs,
            heldout_fraction: split.heldout,
        };
        let cv = split_corpus(&occurrences_of(counts), &opts)?;
        let backoff = Arc::new(BackoffModel::build(&cv.train, backoff.options())?);
        Ok(Experiment { cv, backoff })
    }

    /// Factory over the full neighbor graph of every object.
    pub fn factory(&self, measure: Measure, log_base: f64, on_degenerate: DegeneratePolicy) -> Result<SimFactory> {
        let table = neighbor_counts(&self.cv.train, &self.backoff);
        let rows = neighbor_distributions(&table, &self.backoff, NeighborBase::for_measure(measure));
        let params = NeighborParams {
            log_base: LogBase::new(log_base)?,
            ..NeighborParams::unrestricted(measure, table.num_objects(), 1.0)
        };
        let graph = build_neighbor_graph(&table, &rows, params)?;
        Ok(SimFactory {
            backoff: Arc::clone(&self.backoff),
            rows: Arc::new(rows),
            graph: Arc::new(graph),
            options: SimOptions {
                gamma: 0.0,
                on_degenerate,
            },
        })
    }

    /// Pseudo-word cases of every fold, with pseudo-words formed on the training contexts.
    pub fn pseudo_cases(&self, seed: u64) -> Result<Vec<Vec<PseudowordCase>>> {
        let map = PseudowordMap::build(self.cv.train.context_marginals(), seed)?;
        Ok(self
            .cv
            .folds
            .iter()
            .map(|fold| pseudoword_cases(&self.cv.train, fold, &map))
            .collect())
    }
}
