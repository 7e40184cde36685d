use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::corpus::{ContextId, ObjectId, Occurrence, PairCounts};
use crate::error::{Error, Result};
use crate::estimators::ConditionalModel;

/// Decide whether `context` or `other` is more likely with `object`, after
/// every occurrence of `(object, context)` was removed from training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionTriple {
    pub object: ObjectId,
    pub context: ContextId,
    pub other: ContextId,
    /// `ln(C(x,y) / C(x,y'))` before deletion.
    pub empirical_log_ratio: f64,
    /// The pair-frequency ratio and the training marginal ratio of the two
    /// contexts point in opposite directions.
    pub exceptional: bool,
}

impl DecisionTriple {
    /// Validates a confusion set against the counts before (`original`) and
    /// after (`train`) deletion.
    pub fn new(
        original: &PairCounts,
        train: &PairCounts,
        object: ObjectId,
        context: ContextId,
        other: ContextId,
    ) -> Result<Self> {
        let (a, b) = (original.count(object, context), original.count(object, other));
        if a == 0 || b == 0 {
            return Err(Error::InvalidConfusionSet(format!(
                "object {} must occur with both contexts {} and {} before deletion",
                object.0, context.0, other.0
            )));
        }
        if a < 2 * b && b < 2 * a {
            return Err(Error::InvalidConfusionSet(format!(
                "counts {a} and {b} differ by less than a factor of two"
            )));
        }
        let empirical = (a as f64 / b as f64).ln();
        let (ma, mb) = (train.context_marginal(context), train.context_marginal(other));
        let marginal = (ma as f64 / mb as f64).ln();
        Ok(DecisionTriple {
            object,
            context,
            other,
            empirical_log_ratio: empirical,
            exceptional: empirical * marginal <= 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecisionConfig {
    /// Number of `(x, y)` pairs to delete.
    pub deleted: usize,
    /// Window on the context's total frequency.
    pub min_context_freq: u64,
    pub max_context_freq: u64,
    pub seed: u64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig {
            deleted: 104,
            min_context_freq: 500,
            max_context_freq: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecisionTask {
    /// Counts with every deleted pair removed.
    pub train: PairCounts,
    pub deleted: Vec<(ObjectId, ContextId)>,
    pub triples: Vec<DecisionTriple>,
}

/// Picks pairs whose context frequency lies in the window, deletes them,
/// and pairs each deleted context with a second context that occurred with
/// the same object at least twice as often or at most half as often.
pub fn build_decision_task(original: &PairCounts, cfg: &DecisionConfig) -> Result<DecisionTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut candidates: Vec<(ObjectId, ContextId)> = original
        .iter_pairs()
        .filter(|&(_, y, _)| (cfg.min_context_freq..=cfg.max_context_freq).contains(&original.context_marginal(y)))
        .map(|(x, y, _)| (x, y))
        .collect();
    candidates.shuffle(&mut rng);

    let mut remaining: Vec<u64> = original.object_marginals().to_vec();
    let mut chosen: Vec<(ObjectId, ContextId, ContextId)> = Vec::new();
    let mut deleted_set: HashSet<(ObjectId, ContextId)> = HashSet::new();
    // partner pairs must stay in training
    let mut kept: HashSet<(ObjectId, ContextId)> = HashSet::new();
    for (x, y) in candidates {
        if chosen.len() == cfg.deleted {
            break;
        }
        let c = original.count(x, y);
        if remaining[x.index()] <= c || kept.contains(&(x, y)) {
            continue;
        }
        let partners: Vec<ContextId> = original
            .row(x)
            .iter()
            .filter(|&&(o, co)| o != y && (c >= 2 * co || co >= 2 * c) && !deleted_set.contains(&(x, o)))
            .map(|&(o, _)| o)
            .collect();
        let Some(&other) = partners.choose(&mut rng) else {
            continue;
        };
        remaining[x.index()] -= c;
        deleted_set.insert((x, y));
        kept.insert((x, other));
        chosen.push((x, y, other));
    }
    if chosen.len() < cfg.deleted {
        log::warn!(
            "only {} of {} decision pairs could be chosen",
            chosen.len(),
            cfg.deleted
        );
    }
    if chosen.is_empty() {
        return Err(Error::EmptyTestSet);
    }

    let occurrences: Vec<Occurrence> = original
        .iter_pairs()
        .filter(|&(x, y, _)| !deleted_set.contains(&(x, y)))
        .flat_map(|(x, y, c)| std::iter::repeat_n((x, y), c as usize))
        .collect();
    let train = PairCounts::from_occurrences(original.objects().clone(), original.contexts().clone(), &occurrences);
    let triples = chosen
        .iter()
        .map(|&(x, y, o)| DecisionTriple::new(original, &train, x, y, o))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecisionTask {
        train,
        deleted: chosen.iter().map(|&(x, y, _)| (x, y)).collect(),
        triples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub all: EvalReport,
    pub exceptional: EvalReport,
}

/// Proportion of triples where the sign of `ln(P(y|x)/P(y'|x))` under the
/// model disagrees with the empirical sign. Equal model probabilities count
/// as a disagreement.
pub fn verb_decision_eval<M: ConditionalModel + ?Sized>(
    model: &M,
    triples: &[DecisionTriple],
) -> Result<DecisionReport> {
    if triples.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let (mut n, mut wrong, mut n_exc, mut wrong_exc) = (0, 0, 0, 0);
    for t in triples {
        let p = model.prob(t.object, t.context)?;
        let q = model.prob(t.object, t.other)?;
        let model_sign = (p.ln() - q.ln()).signum();
        let agrees = p != q && model_sign == t.empirical_log_ratio.signum();
        n += 1;
        wrong += usize::from(!agrees);
        if t.exceptional {
            n_exc += 1;
            wrong_exc += usize::from(!agrees);
        }
    }
    let report = |metric: &str, n: usize, wrong: usize| EvalReport {
        metric: metric.into(),
        value: if n == 0 { f64::NAN } else { wrong as f64 / n as f64 },
        n,
        errors: wrong,
        ..Default::default()
    };
    Ok(DecisionReport {
        all: report("decision-error", n, wrong),
        exceptional: report("decision-error-exceptional", n_exc, wrong_exc),
    })
}
