use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EvalReport, TIE_TOLERANCE};
use crate::corpus::{ContextId, ObjectId, Occurrence, PairCounts};
use crate::error::{Error, Result};
use crate::estimators::ConditionalModel;

/// Pairs of contexts merged into artificial ambiguous tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudowordMap {
    pairs: Vec<(ContextId, ContextId)>,
    /// Pseudo-word index of each context, if any.
    lookup: Vec<Option<usize>>,
}

impl PseudowordMap {
    /// Sorts contexts by descending frequency and pairs neighbors in that
    /// order; an odd one out is dropped. Equal frequencies are ordered by a
    /// shuffle seeded with `seed`.
    pub fn build(context_marginals: &[u64], seed: u64) -> Result<Self> {
        if context_marginals.len() < 2 {
            return Err(Error::InvalidParameter(
                "pseudo-words need at least two contexts".into(),
            ));
        }
        let mut order: Vec<usize> = (0..context_marginals.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order.sort_by_key(|&y| std::cmp::Reverse(context_marginals[y]));
        let mut lookup = vec![None; context_marginals.len()];
        let pairs = order
            .chunks_exact(2)
            .enumerate()
            .map(|(i, pair)| {
                lookup[pair[0]] = Some(i);
                lookup[pair[1]] = Some(i);
                (ContextId(pair[0] as u32), ContextId(pair[1] as u32))
            })
            .collect();
        Ok(PseudowordMap { pairs, lookup })
    }

    pub fn pairs(&self) -> &[(ContextId, ContextId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pseudoword_of(&self, y: ContextId) -> Option<usize> {
        self.lookup.get(y.index()).copied().flatten()
    }

    /// The other member of `y`'s pseudo-word.
    pub fn foil(&self, y: ContextId) -> Option<ContextId> {
        let (a, b) = self.pairs[self.pseudoword_of(y)?];
        Some(if a == y { b } else { a })
    }
}

/// One disambiguation instance: the true context and its foil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudowordCase {
    pub object: ObjectId,
    pub truth: ContextId,
    pub foil: ContextId,
}

/// Keeps held-out occurrences that can be scored: the object occurs in
/// training, the context belongs to a pseudo-word, and neither `(x, y)` nor
/// `(x, y')` occurs in training.
pub fn pseudoword_cases(train: &PairCounts, occurrences: &[Occurrence], map: &PseudowordMap) -> Vec<PseudowordCase> {
    occurrences
        .iter()
        .filter_map(|&(x, y)| {
            let foil = map.foil(y)?;
            let usable = train.is_usable_object(x) && train.count(x, y) == 0 && train.count(x, foil) == 0;
            usable.then_some(PseudowordCase {
                object: x,
                truth: y,
                foil,
            })
        })
        .collect()
}

/// `(incorrect + ties/2) / n`, choosing the context with the higher model probability.
pub fn disambiguation_error_rate<M: ConditionalModel + ?Sized>(
    model: &M,
    cases: &[PseudowordCase],
) -> Result<EvalReport> {
    if cases.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let (mut wrong, mut ties) = (0usize, 0usize);
    for c in cases {
        let truth = model.prob(c.object, c.truth)?;
        let foil = model.prob(c.object, c.foil)?;
        if (truth - foil).abs() <= TIE_TOLERANCE {
            ties += 1;
        } else if foil > truth {
            wrong += 1;
        }
    }
    let n = cases.len();
    Ok(EvalReport {
        metric: "pseudoword-error".into(),
        value: (wrong as f64 + ties as f64 / 2.0) / n as f64,
        n,
        errors: wrong,
        ties,
        ..Default::default()
    })
}

/// Scores raw occurrences against `map`; every context must belong to a pseudo-word.
pub fn disambiguation_error_rate_on<M: ConditionalModel + ?Sized>(
    model: &M,
    occurrences: &[Occurrence],
    map: &PseudowordMap,
) -> Result<EvalReport> {
    let cases = occurrences
        .iter()
        .map(|&(x, y)| {
            map.foil(y)
                .map(|foil| PseudowordCase {
                    object: x,
                    truth: y,
                    foil,
                })
                .ok_or(Error::NotInPseudoword(y.0))
        })
        .collect::<Result<Vec<_>>>()?;
    disambiguation_error_rate(model, &cases)
}
