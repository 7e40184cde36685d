//! Evaluation harnesses: pseudo-word disambiguation, perplexity, aggregate
//! KL, the decision task with exceptional triples, and grid search.

mod decision;
mod pseudo;

pub use decision::{
    build_decision_task, verb_decision_eval, DecisionConfig, DecisionReport, DecisionTask, DecisionTriple,
};
pub use pseudo::{
    disambiguation_error_rate, disambiguation_error_rate_on, pseudoword_cases, PseudowordCase, PseudowordMap,
};

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ContextId, CorpusSplit, CrossValidation, ObjectId, Occurrence, PairCounts};
use crate::error::{Error, Result};
use crate::estimators::{BackoffModel, ConditionalModel};
use crate::similarity::{NeighborGraph, SparseDistribution};
use crate::simlm::{SimBackoffModel, SimOptions};

/// Two probabilities this close are a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    pub errors: usize,
    pub ties: usize,
    pub params: BTreeMap<String, String>,
    pub split: Option<usize>,
}

impl EvalReport {
    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perplexity {
    /// Over every test event; `+inf` if any event has probability zero.
    pub overall: f64,
    pub n: usize,
    /// Over events whose pair never occurs in training; `None` without such events.
    pub unseen: Option<f64>,
    pub n_unseen: usize,
    /// Events the model gave probability zero.
    pub zero_probability: usize,
}

/// `exp(-(1/n) sum ln P(y|x))` over `occurrences`, plus the same restricted
/// to pairs unseen in `train`.
pub fn perplexity<M: ConditionalModel + ?Sized>(
    model: &M,
    occurrences: &[Occurrence],
    train: &PairCounts,
) -> Result<Perplexity> {
    let (mut sum, mut sum_unseen, mut n_unseen, mut zeros) = (0.0, 0.0, 0usize, 0usize);
    for &(x, y) in occurrences {
        let p = model.prob(x, y)?;
        if p <= 0.0 {
            zeros += 1;
        }
        let lp = p.ln();
        sum += lp;
        if train.count(x, y) == 0 {
            sum_unseen += lp;
            n_unseen += 1;
        }
    }
    if zeros > 0 {
        log::warn!("{zeros} test events have probability zero; perplexity is infinite");
    }
    let pp = |s: f64, n: usize| (-s / n as f64).exp();
    Ok(Perplexity {
        overall: if occurrences.is_empty() {
            f64::NAN
        } else {
            pp(sum, occurrences.len())
        },
        n: occurrences.len(),
        unseen: (n_unseen > 0).then(|| pp(sum_unseen, n_unseen)),
        n_unseen,
        zero_probability: zeros,
    })
}

/// `sum_x D(q_x || model(.|x))` in nats over the given object distributions.
pub fn aggregate_kl<M: ConditionalModel + ?Sized>(
    objects: &[(ObjectId, &SparseDistribution)],
    model: &M,
) -> Result<f64> {
    let mut total = 0.0;
    for &(x, q) in objects {
        for &(y, p) in q.support() {
            let r = model.prob(x, y)?;
            if r <= 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "model gives zero probability to context {} of object {}",
                    y.0, x.0
                )));
            }
            total += p * (p / r).ln();
        }
    }
    Ok(total.max(0.0))
}

/// Exhaustive grid evaluation.
#[derive(Debug, Clone)]
pub struct GridResult<P> {
    pub best_index: usize,
    pub best: P,
    pub best_value: f64,
    /// Objective per grid point in grid order; failed points are `+inf`.
    pub values: Vec<f64>,
    pub failures: Vec<Option<String>>,
}

/// Evaluates every point in parallel and returns the minimizer; ties go to
/// the earliest point and failed points score `+inf`.
pub fn grid_search<P, F>(grid: &[P], objective: F) -> Result<GridResult<P>>
where
    P: Clone + Sync,
    F: Fn(&P) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let outcomes: Vec<Result<f64>> = grid.par_iter().map(&objective).collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut failures = Vec::with_capacity(grid.len());
    for r in outcomes {
        match r {
            Ok(v) if !v.is_nan() => {
                values.push(v);
                failures.push(None);
            }
            Ok(_) => {
                values.push(f64::INFINITY);
                failures.push(Some("objective is NaN".into()));
            }
            Err(e) => {
                values.push(f64::INFINITY);
                failures.push(Some(e.to_string()));
            }
        }
    }
    let mut best_index = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best_index] {
            best_index = i;
        }
    }
    Ok(GridResult {
        best_index,
        best: grid[best_index].clone(),
        best_value: values[best_index],
        values,
        failures,
    })
}

/// One setting of the similarity model's free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub k: usize,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Cartesian product in `k`, `t`, `beta`, `gamma` order (gamma varies fastest).
pub fn sim_grid(ks: &[usize], thresholds: &[f64], betas: &[f64], gammas: &[f64]) -> Vec<SimPoint> {
    let mut out = Vec::with_capacity(ks.len() * thresholds.len() * betas.len() * gammas.len());
    for &k in ks {
        for &threshold in thresholds {
            for &beta in betas {
                for &gamma in gammas {
                    out.push(SimPoint {
                        k,
                        threshold,
                        beta,
                        gamma,
                    });
                }
            }
        }
    }
    out
}

/// Builds similarity models for grid points from one wide neighbor graph.
#[derive(Debug, Clone)]
pub struct SimFactory {
    pub backoff: Arc<BackoffModel>,
    pub rows: Arc<Vec<Option<SparseDistribution>>>,
    pub graph: Arc<NeighborGraph>,
    pub options: SimOptions,
}

impl SimFactory {
    pub fn build(&self, point: &SimPoint) -> Result<SimBackoffModel> {
        let graph = self.graph.restrict(point.k, point.threshold, point.beta)?;
        SimBackoffModel::new(
            Arc::clone(&self.backoff),
            Arc::clone(&self.rows),
            Arc::new(graph),
            SimOptions {
                gamma: point.gamma,
                ..self.options
            },
        )
    }
}

/// Runs `f` on every fold, in parallel, in fold order.
pub fn cross_validate<T, F>(cv: &CrossValidation, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&CorpusSplit) -> Result<T> + Sync,
{
    (0..cv.num_folds()).into_par_iter().map(|i| f(&cv.fold(i))).collect()
}

/// `100 (baseline - model) / baseline`.
pub fn reduction_percent(baseline: f64, model: f64) -> f64 {
    100.0 * (baseline - model) / baseline
}

/// A row of the perplexity-reduction table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub point: SimPoint,
    pub train_reduction: f64,
    pub test_reduction: f64,
}

pub fn write_reduction_table<W: Write>(mut out: W, rows: &[ReductionRow]) -> Result<()> {
    writeln!(out, "k\tt\tbeta\tgamma\ttraining_reduction_pct\ttest_reduction_pct")?;
    for r in rows {
        let p = r.point;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.k, p.threshold, p.beta, p.gamma, r.train_reduction, r.test_reduction
        )?;
    }
    Ok(())
}

/// Grid report with one row per point: parameters, objective, failure reason.
pub fn write_grid_report<W: Write>(mut out: W, grid: &[SimPoint], result: &GridResult<SimPoint>) -> Result<()> {
    writeln!(out, "k\tt\tbeta\tgamma\tobjective\tbest\tfailure")?;
    for (i, p) in grid.iter().enumerate() {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.k,
            p.threshold,
            p.beta,
            p.gamma,
            result.values[i],
            u8::from(i == result.best_index),
            result.failures[i].as_deref().unwrap_or("")
        )?;
    }
    Ok(())
}

/// An additive score summed over the events of one fold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub total: f64,
    pub n: usize,
}

impl FoldScore {
    pub fn mean(self) -> f64 {
        self.total / self.n as f64
    }
}

/// Mean score over every fold except `fold`.
pub fn pooled_except(scores: &[FoldScore], fold: usize) -> f64 {
    let (total, n) = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != fold)
        .fold((0.0, 0usize), |acc, (_, s)| (acc.0 + s.total, acc.1 + s.n));
    total / n as f64
}

/// For each fold, the grid point with the lowest score pooled over the other
/// folds. `scores[p][f]` is point `p` on fold `f`; ties go to the earliest
/// point and NaN scores never win.
pub fn tune_per_fold(scores: &[Vec<FoldScore>]) -> Result<Vec<usize>> {
    let Some(first) = scores.first() else {
        return Err(Error::EmptyGrid);
    };
    let folds = first.len();
    if scores.iter().any(|s| s.len() != folds) {
        return Err(Error::InvalidParameter(
            "every grid point needs a score per fold".into(),
        ));
    }
    Ok((0..folds)
        .map(|f| {
            let mut best = (0, f64::INFINITY);
            for (p, s) in scores.iter().enumerate() {
                let v = pooled_except(s, f);
                if v < best.1 {
                    best = (p, v);
                }
            }
            best.0
        })
        .collect())
}

/// Disambiguation errors (wrong plus half the ties) on each fold's cases.
pub fn disambiguation_fold_scores<M: ConditionalModel + ?Sized>(
    model: &M,
    folds: &[Vec<PseudowordCase>],
) -> Result<Vec<FoldScore>> {
    folds
        .iter()
        .map(|cases| {
            if cases.is_empty() {
                return Ok(FoldScore::default());
            }
            let r = disambiguation_error_rate(model, cases)?;
            Ok(FoldScore {
                total: r.errors as f64 + r.ties as f64 / 2.0,
                n: r.n,
            })
        })
        .collect()
}

/// Negative natural log-likelihood of each fold's events, optionally only
/// over pairs unseen in `train`. The mean exponentiates to a perplexity.
pub fn log_loss_fold_scores<M: ConditionalModel + ?Sized>(
    model: &M,
    folds: &[Vec<Occurrence>],
    train: &PairCounts,
    unseen_only: bool,
) -> Result<Vec<FoldScore>> {
    folds
        .iter()
        .map(|events| {
            let mut score = FoldScore::default();
            for &(x, y) in events {
                if unseen_only && train.count(x, y) > 0 {
                    continue;
                }
                score.total -= model.prob(x, y)?.ln();
                score.n += 1;
            }
            Ok(score)
        })
        .collect()
}

/// Occurrences whose pair has zero count in `train`.
pub fn unseen_occurrences(train: &PairCounts, occurrences: &[Occurrence]) -> Vec<Occurrence> {
    occurrences
        .iter()
        .copied()
        .filter(|&(x, y)| train.count(x, y) == 0)
        .collect()
}

/// Probability the model assigns to each context of `x`, for inspection.
pub fn conditional_row<M: ConditionalModel + ?Sized>(model: &M, x: ObjectId) -> Result<Vec<f64>> {
    (0..model.num_contexts() as u32)
        .map(|y| model.prob(x, ContextId(y)))
        .collect()
}
