use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{em_fixed_beta, energy_report, init_state, Centroid, ClusterData, ClusterState, Energy};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub beta0: f64,
    /// `beta` is multiplied by this after a step without overshoot.
    pub growth: f64,
    /// Fraction of the last increment kept when too many twins split at once.
    pub shrink: f64,
    pub beta_max: f64,
    pub max_em_iterations: usize,
    pub tol: f64,
    pub perturbation_eps: f64,
    /// Twins whose symmetrized KL exceeds this have split.
    pub split_threshold: f64,
    pub seed: u64,
    /// Stop once this many clusters exist.
    pub max_clusters: usize,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        AnnealingSchedule {
            beta0: 1.0,
            growth: 1.1,
            shrink: 0.5,
            beta_max: 100.0,
            max_em_iterations: 200,
            tol: 1e-6,
            perturbation_eps: 1e-3,
            split_threshold: 1e-2,
            seed: 0,
            max_clusters: usize::MAX,
        }
    }
}

impl AnnealingSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return bad("beta0 must be positive");
        }
        if !(self.growth > 1.0) {
            return bad("growth factor must exceed 1");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink factor must lie in (0,1)");
        }
        if !(self.beta_max >= self.beta0) {
            return bad("beta_max must be at least beta0");
        }
        if self.max_em_iterations == 0 {
            return bad("at least one EM iteration is required");
        }
        if !(self.perturbation_eps > 0.0 && self.perturbation_eps < 1.0) {
            return bad("perturbation must lie in (0,1)");
        }
        if !(self.split_threshold > 0.0) || !(self.tol > 0.0) {
            return bad("split threshold and tolerance must be positive");
        }
        if self.max_clusters == 0 {
            return bad("at least one cluster is required");
        }
        Ok(())
    }
}

/// A node of the split tree. Leaves are current clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub beta_at_split: Option<f64>,
    /// Set when this cluster came to coincide with another one and was folded into it.
    pub merged_into: Option<usize>,
}

/// The state right after the number of clusters changed.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub beta: f64,
    pub state: ClusterState,
    pub energy: Energy,
}

#[derive(Debug, Clone)]
pub struct Annealing {
    /// First entry is the one-cluster state; then one per accepted split step.
    pub snapshots: Vec<Snapshot>,
    pub hierarchy: Vec<HierarchyNode>,
    /// State at the last temperature visited.
    pub state: ClusterState,
}

impl Annealing {
    pub fn num_splits(&self) -> usize {
        self.hierarchy.iter().filter(|n| !n.children.is_empty()).count()
    }

    /// Structured text: one `node` line per hierarchy node and one
    /// `centroid` line per final cluster with its `top_m` contexts.
    pub fn write_hierarchy<W: Write>(&self, mut out: W, contexts: &Vocabulary, top_m: usize) -> Result<()> {
        writeln!(out, "#distsim-hierarchy\tv1\tbeta={}", self.state.beta)?;
        for n in &self.hierarchy {
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let beta = n.beta_at_split.map_or("-".to_string(), |b| b.to_string());
            let children: Vec<String> = n.children.iter().map(usize::to_string).collect();
            let merged = n.merged_into.map_or("-".to_string(), |m| m.to_string());
            writeln!(
                out,
                "node\t{}\t{parent}\t{beta}\t{}\t{merged}",
                n.id,
                children.join(",")
            )?;
        }
        for c in &self.state.centroids {
            let mut top: Vec<(usize, f64)> = c.probs.iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
            top.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            top.truncate(top_m);
            write!(out, "centroid\t{}\t{}", c.id, c.marginal)?;
            for (y, p) in top {
                write!(out, "\t{}:{}", contexts.surface(y as u32), p)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Twins after EM at one temperature.
#[derive(Debug, Clone)]
pub struct TwinProbe {
    /// Centroid `2i` is the original of pair `i`, `2i+1` its twin.
    pub state: ClusterState,
    /// Symmetrized KL within each pair.
    pub divergences: Vec<f64>,
    pub converged: bool,
}

/// Duplicates every centroid of `state` with a perturbed twin and runs EM at `beta`.
pub fn probe_twins(
    data: &ClusterData,
    state: &ClusterState,
    beta: f64,
    schedule: &AnnealingSchedule,
) -> Result<TwinProbe> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    run_twins(data, state, beta, schedule, &mut rng)
}

fn run_twins(
    data: &ClusterData,
    state: &ClusterState,
    beta: f64,
    schedule: &AnnealingSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<TwinProbe> {
    let mut centroids = Vec::with_capacity(2 * state.centroids.len());
    for c in &state.centroids {
        let mut twin: Vec<f64> = c
            .probs
            .iter()
            .map(|&p| {
                if p > 0.0 {
                    p * (1.0 + schedule.perturbation_eps * rng.gen_range(-1.0..=1.0))
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = twin.iter().sum();
        twin.iter_mut().for_each(|p| *p /= total);
        centroids.push(Centroid {
            marginal: c.marginal / 2.0,
            ..c.clone()
        });
        centroids.push(Centroid {
            probs: twin,
            marginal: c.marginal / 2.0,
            ..c.clone()
        });
    }
    let memberships = state
        .memberships
        .iter()
        .map(|row| row.iter().flat_map(|&m| [m / 2.0, m / 2.0]).collect())
        .collect();
    let twins = ClusterState {
        centroids,
        memberships,
        beta,
    };
    let outcome = em_fixed_beta(data, twins, schedule.tol, schedule.max_em_iterations)?;
    let divergences = outcome
        .state
        .centroids
        .chunks(2)
        .map(|pair| symmetric_kl(&pair[0].probs, &pair[1].probs))
        .collect();
    Ok(TwinProbe {
        state: outcome.state,
        divergences,
        converged: outcome.converged,
    })
}

/// `D(a||b) + D(b||a)` in nats over dense vectors with the same support.
pub fn symmetric_kl(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&p, &q) in a.iter().zip(b) {
        match (p > 0.0, q > 0.0) {
            (true, true) => sum += (p - q) * (p / q).ln(),
            (false, false) => {}
            _ => return f64::INFINITY,
        }
    }
    sum.max(0.0)
}

/// Builds the next state from a twin probe: split pairs become two clusters,
/// the rest are merged back.
fn resolve_twins(
    probe: &TwinProbe,
    split: &[bool],
    next_id: &mut usize,
    hierarchy: &mut Vec<HierarchyNode>,
) -> ClusterState {
    let twins = &probe.state;
    let mut centroids = Vec::new();
    let mut columns: Vec<Vec<usize>> = Vec::new();
    for (i, pair) in twins.centroids.chunks(2).enumerate() {
        if split[i] {
            let parent = pair[0].id;
            let mut children = Vec::with_capacity(2);
            for (j, c) in pair.iter().enumerate() {
                let id = *next_id;
                *next_id += 1;
                children.push(id);
                hierarchy.push(HierarchyNode {
                    id,
                    parent: Some(parent),
                    children: Vec::new(),
                    beta_at_split: None,
                    merged_into: None,
                });
                centroids.push(Centroid {
                    id,
                    parent: Some(parent),
                    ..c.clone()
                });
                columns.push(vec![2 * i + j]);
            }
            let node = hierarchy.iter_mut().find(|n| n.id == parent).expect("parent recorded");
            node.children = children;
            node.beta_at_split = Some(twins.beta);
        } else {
            let marginal = pair[0].marginal + pair[1].marginal;
            let (w0, w1) = (pair[0].marginal / marginal, pair[1].marginal / marginal);
            let probs = pair[0]
                .probs
                .iter()
                .zip(&pair[1].probs)
                .map(|(&a, &b)| w0 * a + w1 * b)
                .collect();
            centroids.push(Centroid {
                probs,
                marginal,
                ..pair[0].clone()
            });
            columns.push(vec![2 * i, 2 * i + 1]);
        }
    }
    let memberships = twins
        .memberships
        .iter()
        .map(|row| columns.iter().map(|cols| cols.iter().map(|&c| row[c]).sum()).collect())
        .collect();
    ClusterState {
        centroids,
        memberships,
        beta: twins.beta,
    }
}

/// Folds every centroid into an earlier one it coincides with (symmetrized
/// KL at most `threshold`). Twins of one cluster can drift onto another
/// cluster's territory, which leaves duplicate centroids behind.
pub(super) fn merge_coincident(state: &mut ClusterState, threshold: f64, hierarchy: &mut [HierarchyNode]) -> bool {
    let mut target: Vec<usize> = (0..state.num_clusters()).collect();
    for j in 1..state.num_clusters() {
        if let Some(i) = (0..j).find(|&i| {
            target[i] == i && symmetric_kl(&state.centroids[i].probs, &state.centroids[j].probs) <= threshold
        }) {
            target[j] = i;
        }
    }
    if target.iter().enumerate().all(|(j, &t)| t == j) {
        return false;
    }
    let mut merged: Vec<Centroid> = Vec::new();
    let mut position = vec![0; target.len()];
    for (j, &t) in target.iter().enumerate() {
        if t == j {
            position[j] = merged.len();
            merged.push(state.centroids[j].clone());
            continue;
        }
        let (keep, gone) = (&mut merged[position[t]], &state.centroids[j]);
        let total = keep.marginal + gone.marginal;
        if total > 0.0 {
            let (w0, w1) = (keep.marginal / total, gone.marginal / total);
            for (p, &q) in keep.probs.iter_mut().zip(&gone.probs) {
                *p = w0 * *p + w1 * q;
            }
        }
        keep.marginal = total;
        log::debug!("cluster {} coincides with cluster {}; merged", gone.id, keep.id);
        if let Some(node) = hierarchy.iter_mut().find(|n| n.id == gone.id) {
            node.merged_into = Some(keep.id);
        }
    }
    for row in state.memberships.iter_mut() {
        let mut folded = vec![0.0; merged.len()];
        for (j, &m) in row.iter().enumerate() {
            folded[position[target[j]]] += m;
        }
        *row = folded;
    }
    state.centroids = merged;
    true
}

/// Times in a row the step in `beta` is shrunk when several twin pairs split at once.
const MAX_RETRIES: usize = 10;

/// Deterministic annealing with twin splitting, from one cluster at `beta0`
/// up to `beta_max` or `max_clusters` clusters.
pub fn anneal(data: &ClusterData, schedule: &AnnealingSchedule) -> Result<Annealing> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let start = init_state(data, schedule.beta0)?;
    let start = em_fixed_beta(data, start, schedule.tol, schedule.max_em_iterations)?.state;
    let snapshot = |state: &ClusterState| -> Result<Snapshot> {
        Ok(Snapshot {
            beta: state.beta,
            state: state.clone(),
            energy: energy_report(data, state)?,
        })
    };
    let mut snapshots = vec![snapshot(&start)?];
    let mut hierarchy = vec![HierarchyNode {
        id: 0,
        parent: None,
        children: Vec::new(),
        beta_at_split: None,
        merged_into: None,
    }];
    let mut next_id = 1;
    let mut current = start;
    let mut prev_beta = schedule.beta0;
    let mut beta = schedule.beta0;
    let mut retries = 0;
    // off after a step whose splits all folded back into existing clusters
    let mut shrink_on_split = true;

    while current.num_clusters() < schedule.max_clusters && beta <= schedule.beta_max {
        let probe = run_twins(data, &current, beta, schedule, &mut rng)?;
        let mut split: Vec<bool> = probe
            .divergences
            .iter()
            .map(|&d| d > schedule.split_threshold)
            .collect();
        let n_split = split.iter().filter(|&&s| s).count();
        if n_split > 1 && shrink_on_split && retries < MAX_RETRIES && beta > prev_beta {
            let lowered = prev_beta + schedule.shrink * (beta - prev_beta);
            log::debug!("{n_split} twins split at beta {beta}; retrying at {lowered}");
            beta = lowered;
            retries += 1;
            continue;
        }
        retries = 0;

        let room = schedule.max_clusters - current.num_clusters();
        if n_split > room {
            // keep the most divergent pairs
            let mut order: Vec<usize> = (0..split.len()).filter(|&i| split[i]).collect();
            order.sort_by(|&a, &b| probe.divergences[b].total_cmp(&probe.divergences[a]).then(a.cmp(&b)));
            for &i in &order[room..] {
                split[i] = false;
            }
        }
        let before = current.num_clusters();
        let resolved = resolve_twins(&probe, &split, &mut next_id, &mut hierarchy);
        current = em_fixed_beta(data, resolved, schedule.tol, schedule.max_em_iterations)?.state;
        if merge_coincident(&mut current, schedule.split_threshold, &mut hierarchy) {
            current = em_fixed_beta(data, current, schedule.tol, schedule.max_em_iterations)?.state;
        }
        if n_split > 0 {
            let gained = current.num_clusters() > before;
            // Splits that only reappear as copies of existing clusters would
            // otherwise shrink every following step to a crawl.
            shrink_on_split = gained;
            if gained {
                log::info!("beta {beta}: {} clusters", current.num_clusters());
                snapshots.push(snapshot(&current)?);
            }
        }
        prev_beta = beta;
        beta *= schedule.growth;
    }
    Ok(Annealing {
        snapshots,
        hierarchy,
        state: current,
    })
}
