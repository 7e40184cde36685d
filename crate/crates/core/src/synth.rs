//! Seeded synthetic sources with known probabilities.
//!
//! Used by the test suites and benchmarks where real corpora are unavailable:
//! the true conditional distributions are known, so estimates can be checked
//! against them.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ContextId, ObjectId, OccurrenceList, Vocabulary};
use crate::error::{Error, Result};

/// Objects fall into groups; each group concentrates on its own block of contexts.
#[derive(Debug, Clone)]
pub struct GroupMixture {
    /// Group of each object, indexed by object id.
    pub labels: Vec<usize>,
    /// True `P(y|x)`, dense, indexed by object id.
    pub conditionals: Vec<Vec<f64>>,
    pub corpus: OccurrenceList,
}

/// `groups` groups of `per_group` objects over `num_contexts` contexts.
/// A group puts `purity` of its mass on its own contiguous block of contexts
/// and spreads the rest evenly; each object jitters its group distribution
/// by up to `jitter` (relative) and draws `samples` occurrences.
pub fn group_mixture(
    groups: usize,
    per_group: usize,
    num_contexts: usize,
    purity: f64,
    jitter: f64,
    samples: usize,
    seed: u64,
) -> Result<GroupMixture> {
    if groups == 0 || per_group == 0 || num_contexts < groups {
        return Err(Error::InvalidParameter("need at least one context per group".into()));
    }
    if !(0.0..=1.0).contains(&purity) || !(0.0..1.0).contains(&jitter) {
        return Err(Error::InvalidParameter(
            "purity must lie in [0,1] and jitter in [0,1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = num_contexts / groups;
    let mut corpus = vocabularies(groups * per_group, num_contexts);
    let mut labels = Vec::new();
    let mut conditionals = Vec::new();
    for g in 0..groups {
        let home = g * block..(g + 1) * block;
        let base: Vec<f64> = (0..num_contexts)
            .map(|y| {
                if home.contains(&y) {
                    purity / block as f64
                } else {
                    (1.0 - purity) / (num_contexts - block) as f64
                }
            })
            .collect();
        for _ in 0..per_group {
            let mut probs: Vec<f64> = base
                .iter()
                .map(|&p| p * (1.0 + jitter * rng.gen_range(-1.0..=1.0)))
                .collect();
            normalize(&mut probs);
            let x = ObjectId(labels.len() as u32);
            let sampler = WeightedIndex::new(&probs).expect("positive weights");
            for _ in 0..samples {
                corpus.occurrences.push((x, ContextId(sampler.sample(&mut rng) as u32)));
            }
            labels.push(g);
            conditionals.push(probs);
        }
    }
    Ok(GroupMixture {
        labels,
        conditionals,
        corpus,
    })
}

/// A latent-class bigram source: `P(y|x) = sum_k P(k|x) P(y|k)`, with Zipfian
/// object frequencies and per-class Zipfian context preferences.
#[derive(Debug, Clone)]
pub struct LatentClassSource {
    object_probs: Vec<f64>,
    conditionals: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct LatentClassConfig {
    pub objects: usize,
    pub contexts: usize,
    pub classes: usize,
    /// Exponent of the object frequency law.
    pub object_zipf: f64,
    /// Exponent of each class's context preference law.
    pub context_zipf: f64,
    /// Mass an object gives its own class; the rest is spread over all classes.
    pub purity: f64,
    pub seed: u64,
}

impl Default for LatentClassConfig {
    fn default() -> Self {
        LatentClassConfig {
            objects: 200,
            contexts: 100,
            classes: 5,
            object_zipf: 0.8,
            context_zipf: 1.0,
            purity: 0.85,
            seed: 0,
        }
    }
}

impl LatentClassSource {
    pub fn new(cfg: LatentClassConfig) -> Result<Self> {
        if cfg.objects == 0 || cfg.contexts < 2 || cfg.classes == 0 {
            return Err(Error::InvalidParameter(
                "latent source needs objects, contexts and classes".into(),
            ));
        }
        if !(0.0..=1.0).contains(&cfg.purity) {
            return Err(Error::InvalidParameter("purity must lie in [0,1]".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut object_probs = zipf(cfg.objects, cfg.object_zipf);
        object_probs.shuffle(&mut rng);
        let class_contexts: Vec<Vec<f64>> = (0..cfg.classes)
            .map(|_| {
                let mut p = zipf(cfg.contexts, cfg.context_zipf);
                p.shuffle(&mut rng);
                p
            })
            .collect();
        let mut labels = Vec::with_capacity(cfg.objects);
        let mut conditionals = Vec::with_capacity(cfg.objects);
        for _ in 0..cfg.objects {
            let own = rng.gen_range(0..cfg.classes);
            let mut mix: Vec<f64> = (0..cfg.classes).map(|_| rng.gen::<f64>()).collect();
            normalize(&mut mix);
            for (k, m) in mix.iter_mut().enumerate() {
                *m *= 1.0 - cfg.purity;
                if k == own {
                    *m += cfg.purity;
                }
            }
            let mut probs = vec![0.0; cfg.contexts];
            for (m, class) in mix.iter().zip(&class_contexts) {
                for (p, &c) in probs.iter_mut().zip(class) {
                    *p += m * c;
                }
            }
            labels.push(own);
            conditionals.push(probs);
        }
        Ok(LatentClassSource {
            object_probs,
            conditionals,
            labels,
        })
    }

    pub fn num_objects(&self) -> usize {
        self.object_probs.len()
    }

    pub fn num_contexts(&self) -> usize {
        self.conditionals[0].len()
    }

    /// True `P(y|x)`.
    pub fn conditional(&self, x: ObjectId) -> &[f64] {
        &self.conditionals[x.index()]
    }

    pub fn object_prob(&self, x: ObjectId) -> f64 {
        self.object_probs[x.index()]
    }

    pub fn label(&self, x: ObjectId) -> usize {
        self.labels[x.index()]
    }

    /// `n` independent `(x, y)` draws. Vocabularies list every object and
    /// context in id order, so ids match the source even for unsampled words.
    pub fn sample(&self, n: usize, seed: u64) -> OccurrenceList {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut corpus = vocabularies(self.num_objects(), self.num_contexts());
        let objects = WeightedIndex::new(&self.object_probs).expect("positive weights");
        let contexts: Vec<WeightedIndex<f64>> = self
            .conditionals
            .iter()
            .map(|p| WeightedIndex::new(p).expect("positive weights"))
            .collect();
        corpus.occurrences.reserve(n);
        for _ in 0..n {
            let x = objects.sample(&mut rng);
            let y = contexts[x].sample(&mut rng);
            corpus.occurrences.push((ObjectId(x as u32), ContextId(y as u32)));
        }
        corpus
    }
}

fn vocabularies(objects: usize, contexts: usize) -> OccurrenceList {
    let mut o = Vocabulary::new();
    for i in 0..objects {
        o.intern(&format!("o{i}"));
    }
    let mut c = Vocabulary::new();
    for j in 0..contexts {
        c.intern(&format!("c{j}"));
    }
    OccurrenceList {
        objects: o,
        contexts: c,
        occurrences: Vec::new(),
    }
}

fn zipf(n: usize, exponent: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-exponent)).collect();
    normalize(&mut p);
    p
}

fn normalize(p: &mut [f64]) {
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
}
