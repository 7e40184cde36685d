//! Soft distributional clustering by deterministic annealing.
//!
//! Objects are represented by their MLE context distributions. Each cluster
//! has a centroid distribution, and each object a membership distribution
//! over clusters. At inverse temperature `beta` the memberships are
//! `exp(-beta d(x,c)) / Z_x` with `d` the KL divergence (in nats) from the
//! object to the centroid, and the centroids are membership-weighted
//! averages of the objects. Alternating the two updates never increases the
//! free energy `F = D - H/beta`.

mod anneal;

pub use anneal::{anneal, probe_twins, symmetric_kl, Annealing, AnnealingSchedule, HierarchyNode, Snapshot};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ContextId, ObjectId, PairCounts, Vocabulary};
use crate::error::{Error, Result};
use crate::estimators::{check_context, ConditionalModel};
use crate::similarity::SparseDistribution;

/// Memberships are kept at or above this so every object stays associated
/// with every cluster, and centroids stay positive on the union support.
pub const MEMBERSHIP_FLOOR: f64 = 1e-200;

/// How the object prior `P(x)` is set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// `P(x) = 1/|X|`.
    #[default]
    Uniform,
    /// `P(x) = C(x)/N`.
    Mle,
}

impl std::str::FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(PriorMode::Uniform),
            "mle" => Ok(PriorMode::Mle),
            other => Err(Error::InvalidParameter(format!("unknown prior mode {other:?}"))),
        }
    }
}

/// The objects being clustered: their distributions and prior.
#[derive(Debug, Clone)]
pub struct ClusterData {
    ids: Vec<ObjectId>,
    objects: Vec<SparseDistribution>,
    prior: Vec<f64>,
    num_contexts: usize,
}

impl ClusterData {
    pub fn new(
        ids: Vec<ObjectId>,
        objects: Vec<SparseDistribution>,
        prior: Vec<f64>,
        num_contexts: usize,
    ) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::InvalidParameter("nothing to cluster".into()));
        }
        if ids.len() != objects.len() || prior.len() != objects.len() {
            return Err(Error::InvalidParameter(
                "ids, objects and prior differ in length".into(),
            ));
        }
        let mass: f64 = prior.iter().sum();
        if prior.iter().any(|&p| !(p > 0.0)) || (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "object prior must be positive and sum to 1".into(),
            ));
        }
        if let Some(d) = objects
            .iter()
            .find(|d| d.support().last().is_some_and(|&(y, _)| y.index() >= num_contexts))
        {
            let y = d.support().last().expect("nonempty").0;
            return Err(Error::UnknownContext(y.0));
        }
        Ok(ClusterData {
            ids,
            objects,
            prior,
            num_contexts,
        })
    }

    /// Uses every object with a positive marginal.
    pub fn from_counts(counts: &PairCounts, prior: PriorMode) -> Result<Self> {
        let mut ids = Vec::new();
        let mut objects = Vec::new();
        for x in counts.usable_objects() {
            ids.push(x);
            objects.push(counts.mle_distribution(x).expect("usable object"));
        }
        if ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let prior = match prior {
            PriorMode::Uniform => vec![1.0 / ids.len() as f64; ids.len()],
            PriorMode::Mle => {
                let total: u64 = ids.iter().map(|&x| counts.object_marginal(x)).sum();
                ids.iter()
                    .map(|&x| counts.object_marginal(x) as f64 / total as f64)
                    .collect()
            }
        };
        Self::new(ids, objects, prior, counts.num_contexts())
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn ids(&self) -> &[ObjectId] {
        &self.ids
    }

    pub fn object(&self, i: usize) -> &SparseDistribution {
        &self.objects[i]
    }

    pub fn objects(&self) -> &[SparseDistribution] {
        &self.objects
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    /// Row index of object `x`, if it is clustered.
    pub fn index_of(&self, x: ObjectId) -> Option<usize> {
        self.ids.binary_search(&x).ok()
    }
}

/// A cluster representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub id: usize,
    pub parent: Option<usize>,
    /// Dense `P(y|c)` over all contexts.
    pub probs: Vec<f64>,
    /// `P(c)`.
    pub marginal: f64,
}

impl Centroid {
    pub fn distribution(&self) -> Result<SparseDistribution> {
        SparseDistribution::from_dense(&self.probs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub centroids: Vec<Centroid>,
    /// `memberships[x][c] = P(c|x)`.
    pub memberships: Vec<Vec<f64>>,
    pub beta: f64,
}

impl ClusterState {
    pub fn num_clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Index of the most probable cluster for object row `x`, lowest index on ties.
    pub fn hard_assignment(&self, x: usize) -> usize {
        let row = &self.memberships[x];
        let mut best = 0;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        best
    }
}

/// One centroid at the prior-weighted mean of all objects; all memberships 1.
pub fn init_state(data: &ClusterData, beta: f64) -> Result<ClusterState> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    let mut probs = vec![0.0; data.num_contexts];
    for (q, &px) in data.objects.iter().zip(&data.prior) {
        for &(y, p) in q.support() {
            probs[y.index()] += px * p;
        }
    }
    Ok(ClusterState {
        centroids: vec![Centroid {
            id: 0,
            parent: None,
            probs,
            marginal: 1.0,
        }],
        memberships: vec![vec![1.0]; data.len()],
        beta,
    })
}

/// `D(q || c)` in nats against a dense centroid.
pub fn divergence_to(q: &SparseDistribution, centroid: &[f64]) -> f64 {
    let mut sum = 0.0;
    for &(y, p) in q.support() {
        let c = centroid[y.index()];
        if c <= 0.0 {
            return f64::INFINITY;
        }
        sum += p * (p / c).ln();
    }
    sum.max(0.0)
}

fn distortions(data: &ClusterData, state: &ClusterState, x: usize) -> Result<Vec<f64>> {
    state
        .centroids
        .iter()
        .enumerate()
        .map(|(c, centroid)| {
            let d = divergence_to(&data.objects[x], &centroid.probs);
            if d.is_finite() {
                Ok(d)
            } else {
                Err(Error::NonFiniteDistortion { object: x, centroid: c })
            }
        })
        .collect()
}

/// Maximum-entropy memberships `exp(-beta d)/Z` and `ln Z`, computed stably.
fn gibbs(distortions: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let min = distortions.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = distortions.iter().map(|&d| (-beta * (d - min)).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let row = weights.iter().map(|&w| (w / sum).max(MEMBERSHIP_FLOOR)).collect();
    (row, -beta * min + sum.ln())
}

pub fn update_memberships(data: &ClusterData, state: &mut ClusterState) -> Result<()> {
    let beta = state.beta;
    let rows = (0..data.len())
        .into_par_iter()
        .map(|x| Ok(gibbs(&distortions(data, state, x)?, beta).0))
        .collect::<Result<Vec<_>>>()?;
    state.memberships = rows;
    Ok(())
}

/// Membership row of a distribution that was not part of the clustered data.
pub fn membership_for_new_object(state: &ClusterState, q: &SparseDistribution) -> Result<Vec<f64>> {
    let d = state
        .centroids
        .iter()
        .enumerate()
        .map(|(c, centroid)| {
            let d = divergence_to(q, &centroid.probs);
            if d.is_finite() {
                Ok(d)
            } else {
                Err(Error::NonFiniteDistortion {
                    object: usize::MAX,
                    centroid: c,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gibbs(&d, state.beta).0)
}

/// `P(y|c) = sum_x P(x|c) q_x(y)` with `P(x|c) = P(c|x)P(x)/P(c)`.
pub fn update_centroids(data: &ClusterData, state: &mut ClusterState) -> Result<()> {
    let n = data.num_contexts;
    let memberships = &state.memberships;
    let updated = (0..state.centroids.len())
        .into_par_iter()
        .map(|c| {
            let marginal: f64 = memberships.iter().zip(&data.prior).map(|(m, &px)| m[c] * px).sum();
            if !(marginal > 0.0) {
                return Err(Error::CorruptState(format!("cluster {c} has zero marginal")));
            }
            let mut probs = vec![0.0; n];
            for ((q, m), &px) in data.objects.iter().zip(memberships).zip(&data.prior) {
                let w = m[c] * px / marginal;
                for &(y, p) in q.support() {
                    probs[y.index()] += w * p;
                }
            }
            Ok((probs, marginal))
        })
        .collect::<Result<Vec<_>>>()?;
    for (centroid, (probs, marginal)) in state.centroids.iter_mut().zip(updated) {
        centroid.probs = probs;
        centroid.marginal = marginal;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    /// `D = sum_x P(x) sum_c P(c|x) d(x,c)`.
    pub distortion: f64,
    /// `H = -sum_x P(x) sum_c P(c|x) ln P(c|x)`.
    pub entropy: f64,
    /// `F = D - H/beta`.
    pub free_energy: f64,
    /// `-(1/beta) sum_x P(x) ln Z_x`; equals `free_energy` when the
    /// memberships are the maximum-entropy ones for the current centroids.
    pub free_energy_maxent: f64,
}

pub fn energy_report(data: &ClusterData, state: &ClusterState) -> Result<Energy> {
    let (mut distortion, mut entropy, mut log_z) = (0.0, 0.0, 0.0);
    for x in 0..data.len() {
        let d = distortions(data, state, x)?;
        let px = data.prior[x];
        let m = &state.memberships[x];
        distortion += px * m.iter().zip(&d).map(|(&p, &dc)| p * dc).sum::<f64>();
        entropy -= px * m.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
        log_z += px * gibbs(&d, state.beta).1;
    }
    Ok(Energy {
        distortion,
        entropy,
        free_energy: distortion - entropy / state.beta,
        free_energy_maxent: -log_z / state.beta,
    })
}

/// Result of alternating updates at one temperature.
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub state: ClusterState,
    pub iterations: usize,
    pub converged: bool,
    /// Free energy after each full membership-then-centroid cycle.
    pub free_energy: Vec<f64>,
}

/// Alternates membership and centroid updates until the largest parameter
/// change falls below `tol` or `max_iterations` cycles have run.
pub fn em_fixed_beta(
    data: &ClusterData,
    mut state: ClusterState,
    tol: f64,
    max_iterations: usize,
) -> Result<EmOutcome> {
    let mut trace = Vec::new();
    for it in 1..=max_iterations {
        let before = state.clone();
        update_memberships(data, &mut state)?;
        update_centroids(data, &mut state)?;
        trace.push(energy_report(data, &state)?.free_energy);
        if max_change(&before, &state) < tol {
            return Ok(EmOutcome {
                state,
                iterations: it,
                converged: true,
                free_energy: trace,
            });
        }
    }
    log::debug!("EM at beta {} did not converge in {max_iterations} cycles", state.beta);
    Ok(EmOutcome {
        state,
        iterations: max_iterations,
        converged: false,
        free_energy: trace,
    })
}

fn max_change(a: &ClusterState, b: &ClusterState) -> f64 {
    if a.centroids.len() != b.centroids.len() || a.memberships.len() != b.memberships.len() {
        return f64::INFINITY;
    }
    let centroids = a
        .centroids
        .iter()
        .zip(&b.centroids)
        .flat_map(|(c, d)| c.probs.iter().zip(&d.probs))
        .map(|(p, q)| (p - q).abs());
    let memberships = a
        .memberships
        .iter()
        .zip(&b.memberships)
        .flat_map(|(m, n)| m.iter().zip(n))
        .map(|(p, q)| (p - q).abs());
    centroids.chain(memberships).fold(0.0, f64::max)
}

/// `sum_c P(c|x) P(y|c)` for clustered object row `x`.
pub fn cluster_conditional_prob(state: &ClusterState, x: usize, y: ContextId) -> Result<f64> {
    let row = state.memberships.get(x).ok_or(Error::UnknownObject(x as u32))?;
    Ok(row
        .iter()
        .zip(&state.centroids)
        .map(|(&m, c)| m * c.probs.get(y.index()).copied().unwrap_or(0.0))
        .sum())
}

/// A cluster state used as a conditional model, addressed by object id.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    state: ClusterState,
    rows: Vec<Option<usize>>,
    num_contexts: usize,
}

impl ClusterModel {
    pub fn new(data: &ClusterData, state: ClusterState, num_objects: usize) -> Self {
        let mut rows = vec![None; num_objects];
        for (i, &x) in data.ids().iter().enumerate() {
            if x.index() < num_objects {
                rows[x.index()] = Some(i);
            }
        }
        ClusterModel {
            state,
            rows,
            num_contexts: data.num_contexts(),
        }
    }

    /// Gives an unclustered object memberships derived from its distribution.
    pub fn add_object(&mut self, x: ObjectId, q: &SparseDistribution) -> Result<()> {
        let row = membership_for_new_object(&self.state, q)?;
        if x.index() >= self.rows.len() {
            self.rows.resize(x.index() + 1, None);
        }
        self.rows[x.index()] = Some(self.state.memberships.len());
        self.state.memberships.push(row);
        Ok(())
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }
}

impl ConditionalModel for ClusterModel {
    fn prob(&self, x: ObjectId, y: ContextId) -> Result<f64> {
        check_context(self.num_contexts, y)?;
        let row = self
            .rows
            .get(x.index())
            .copied()
            .flatten()
            .ok_or(Error::UnknownObject(x.0))?;
        cluster_conditional_prob(&self.state, row, y)
    }

    fn num_contexts(&self) -> usize {
        self.num_contexts
    }
}

/// Writes `object \t centroid \t P(c|x)` lines.
pub fn write_memberships<W: Write>(
    mut out: W,
    data: &ClusterData,
    state: &ClusterState,
    objects: &Vocabulary,
) -> Result<()> {
    for (i, &x) in data.ids().iter().enumerate() {
        for (c, &p) in state.memberships[i].iter().enumerate() {
            writeln!(out, "{}\t{}\t{}", objects.surface(x.0), state.centroids[c].id, p)?;
        }
    }
    Ok(())
}
