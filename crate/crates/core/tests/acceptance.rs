//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distsim::cluster::{
    anneal, em_fixed_beta, energy_report, init_state, probe_twins, update_centroids, update_memberships,
    AnnealingSchedule, ClusterData, ClusterState, PriorMode,
};
use distsim::corpus::{ingest_pairs, ingest_tokens, split_corpus, IngestOptions, SplitOptions};
use distsim::estimators::{conditional_mass, JelinekMercer, LambdaSchedule, UnigramModel};
use distsim::eval::{
    disambiguation_fold_scores, log_loss_fold_scores, pseudoword_cases, sim_grid, tune_per_fold, FoldScore,
    PseudowordCase, PseudowordMap, SimFactory, SimPoint,
};
use distsim::similarity::{
    cosine, kendall_tau, kl_divergence, l1_distance, top_overlap, total_divergence_to_mean, weight, ConfusionTable,
};
use distsim::simlm::{build_neighbor_graph, neighbor_distributions, DegeneratePolicy, NeighborBase, SimOptions};
use distsim::synth::{group_mixture, LatentClassConfig, LatentClassSource};
use distsim::{
    BackoffModel, BackoffOptions, ConditionalModel, ContextId, LogBase, Measure, MleModel, NeighborParams, ObjectId,
    Occurrence, PairCounts, SimBackoffModel, SparseDistribution,
};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

const EXPERIMENT_OBJECTS: usize = 500;
const EXPERIMENT_CONTEXTS: usize = 200;
const EXPERIMENT_SAMPLE: usize = 120_000;

const ROSE: &str = "a rose is a rose is not a nose";

fn main() {
    let criteria: [Criterion; 12] = [
        ("information inequality", information_inequality),
        ("sparse-form oracles", sparse_oracles),
        ("worked distance values", micro_numbers),
        ("estimator normalization", normalization),
        ("sampling identity", sampling_identity),
        ("confusion table", confusion_table),
        ("clustering", clustering),
        ("phase transition", phase_transition),
        ("pseudo-word experiment", pseudoword_experiment),
        ("neighbor truncation", neighbor_truncation),
        ("unseen-pair perplexity", unseen_perplexity),
        ("singleton study", singleton_study),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match std::panic::catch_unwind(check) {
            Ok(outcome) => outcome,
            Err(e) => (false, format!("panicked: {}", panic_message(&e))),
        };
        failed += usize::from(!pass);
        println!(
            "acceptance {:>2} {}: {} ({detail}) [{:.1}s]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn rose() -> PairCounts {
    ingest_tokens(ROSE.as_bytes(), IngestOptions::default())
        .unwrap()
        .counts()
}

fn random_distribution(rng: &mut ChaCha8Rng, universe: usize, max_support: usize) -> SparseDistribution {
    let size = rng.gen_range(1..=max_support.min(universe));
    let mut ids: Vec<u32> = (0..universe as u32).collect();
    let (chosen, _) = ids.partial_shuffle(rng, size);
    SparseDistribution::from_weights(chosen.iter().map(|&y| (ContextId(y), rng.gen_range(0.01..1.0)))).unwrap()
}

fn information_inequality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut negatives, mut bad_zero, mut bad_positive, mut equal_pairs) = (0, 0, 0, 0);
    for i in 0..1000 {
        let q = random_distribution(&mut rng, 30, 20);
        let r = match i % 4 {
            0 => q.clone(),
            // same support, so the divergence is finite
            1 => SparseDistribution::from_weights(q.support().iter().map(|&(y, _)| (y, rng.gen_range(0.01..1.0))))
                .unwrap(),
            _ => random_distribution(&mut rng, 30, 20),
        };
        let d = kl_divergence(&q, &r, LogBase::NATURAL);
        let equal = q.support().len() == r.support().len()
            && q.support()
                .iter()
                .zip(r.support())
                .all(|(a, b)| a.0 == b.0 && (a.1 - b.1).abs() <= 1e-12);
        equal_pairs += usize::from(equal);
        negatives += usize::from(d < 0.0);
        bad_zero += usize::from(equal && d != 0.0);
        bad_positive += usize::from(!equal && d <= 0.0);
    }
    let secs = start.elapsed().as_secs_f64();
    (
        negatives == 0 && bad_zero == 0 && bad_positive == 0 && secs < 1.0,
        format!(
            "1000 pairs, {equal_pairs} equal; negative {negatives}, equal but nonzero {bad_zero}, \
             unequal but zero {bad_positive}; {secs:.3}s"
        ),
    )
}

fn dense_total_divergence(q: &[f64], r: &[f64]) -> f64 {
    let term = |p: f64, m: f64| if p > 0.0 { p * (p / m).ln() } else { 0.0 };
    q.iter()
        .zip(r)
        .map(|(&a, &b)| term(a, (a + b) / 2.0) + term(b, (a + b) / 2.0))
        .sum()
}

fn naive_tau(q: &[f64], r: &[f64]) -> f64 {
    let n = q.len();
    let mut balance = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let s = (q[i] - q[j]).partial_cmp(&0.0).unwrap() as i64 * (r[i] - r[j]).partial_cmp(&0.0).unwrap() as i64;
            balance += s;
        }
    }
    balance as f64 / (n * (n - 1) / 2) as f64
}

fn sparse_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_a, mut worst_l1) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let q = random_distribution(&mut rng, 40, 20);
        let r = random_distribution(&mut rng, 40, 20);
        let (dq, dr) = (q.to_dense(40), r.to_dense(40));
        let a = total_divergence_to_mean(&q, &r, LogBase::NATURAL);
        worst_a = worst_a.max((a - dense_total_divergence(&dq, &dr)).abs());
        let l1: f64 = dq.iter().zip(&dr).map(|(a, b)| (a - b).abs()).sum();
        worst_l1 = worst_l1.max((l1_distance(&q, &r) - l1).abs());
    }
    let mut tau_mismatch = 0;
    for i in 0..1000 {
        let universe = 2 + i % 30;
        let q = random_distribution(&mut rng, universe, 12);
        // coarse weights so the rankings contain ties
        let r = SparseDistribution::from_weights(
            random_distribution(&mut rng, universe, 12)
                .support()
                .iter()
                .map(|&(y, p)| (y, (p * 4.0).ceil())),
        )
        .unwrap();
        let fast = kendall_tau(&q, &r, universe).unwrap();
        tau_mismatch += usize::from(fast != naive_tau(&q.to_dense(universe), &r.to_dense(universe)));
    }
    (
        worst_a <= 1e-12 && worst_l1 <= 1e-12 && tau_mismatch == 0,
        format!("max |A - dense| {worst_a:.2e}, max |L1 - dense| {worst_l1:.2e}, tau mismatches {tau_mismatch}/1000"),
    )
}

fn micro_numbers() -> Outcome {
    let d = |p: &[f64]| SparseDistribution::from_dense(p).unwrap();
    let (q, r, s) = (d(&[1.0, 0.0]), d(&[0.5, 0.5]), d(&[0.0, 1.0]));
    let ln2 = 2f64.ln();
    let a = |u: &SparseDistribution, v: &SparseDistribution| total_divergence_to_mean(u, v, LogBase::NATURAL);
    let path = a(&q, &r) + a(&r, &s);
    let direct = a(&q, &s);
    let triangle = (path - (ln2 + (32.0f64 / 27.0).ln())).abs() <= 1e-12 && (direct - 2.0 * ln2).abs() <= 1e-12;
    let l1 = l1_distance(&q, &s);
    let cos = cosine(&q, &s).unwrap();
    let self_weights = [0.5, 1.0, 3.0, 4.0, 7.25]
        .iter()
        .all(|&b| weight(Measure::L1, 0.0, b) == 2f64.powf(b));
    (
        triangle && l1 == 2.0 && cos == 0.0 && self_weights,
        format!(
            "A path {path:.15}, A direct {direct:.15}, disjoint L1 {l1}, cosine {cos}, W_L1(x,x)=2^beta {self_weights}"
        ),
    )
}

fn random_corpus(rng: &mut ChaCha8Rng) -> PairCounts {
    let objects = rng.gen_range(3..40);
    let contexts = rng.gen_range(objects.max(10)..80);
    let mut text = String::new();
    for x in 0..objects {
        let distinct = rng.gen_range(1..=contexts / 2);
        let mut ids: Vec<usize> = (0..contexts).collect();
        let (chosen, _) = ids.partial_shuffle(rng, distinct);
        for &y in chosen.iter() {
            let c = if rng.gen_bool(0.5) { 1 } else { rng.gen_range(1..12) };
            text.push_str(&format!("x{x}\ty{y}\t{c}\n"));
        }
    }
    ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap()
}

fn normalization() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut corpora = vec![rose()];
    corpora.extend((0..50).map(|_| random_corpus(&mut rng)));
    let (mut worst, mut models) = (0.0f64, 0usize);
    for (i, c) in corpora.iter().enumerate() {
        let backoff = Arc::new(BackoffModel::build(c, BackoffOptions::default()).unwrap());
        let jm = JelinekMercer::new(
            c,
            LambdaSchedule::buckets(vec![(0, 0.1), (1, 0.3), (5, 0.6), (20, 0.85)]).unwrap(),
        );
        let mut sims = Vec::new();
        for (j, &measure) in Measure::ALL.iter().enumerate() {
            let params = NeighborParams {
                k: 1 + (i + j) % c.num_objects(),
                ..NeighborParams::unrestricted(measure, c.num_objects(), 1.0 + (i % 5) as f64)
            };
            let gamma = [0.0, 0.1, 0.5, 1.0][(i + j) % 4];
            let options = SimOptions {
                gamma,
                on_degenerate: if gamma == 0.0 {
                    DegeneratePolicy::Unigram
                } else {
                    DegeneratePolicy::Error
                },
            };
            sims.push(SimBackoffModel::from_counts(c, Arc::clone(&backoff), params, options).unwrap());
        }
        let mle = MleModel::new(c);
        let mut all: Vec<&dyn ConditionalModel> = vec![&mle, &jm, backoff.as_ref()];
        all.extend(sims.iter().map(|m| m as &dyn ConditionalModel));
        for x in c.usable_objects() {
            for m in &all {
                worst = worst.max((conditional_mass(*m, x).unwrap() - 1.0).abs());
                models += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-6 && secs < 10.0,
        format!("51 corpora, {models} conditional rows, max |sum - 1| {worst:.2e}, {secs:.2}s"),
    )
}

fn sampling_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n_contexts = rng.gen_range(2..15);
        let len = rng.gen_range(1..500);
        let sample: Vec<u32> = (0..len).map(|_| rng.gen_range(0..n_contexts as u32)).collect();
        let mut counts = vec![0.0; n_contexts];
        for &y in &sample {
            counts[y as usize] += 1.0;
        }
        let q = SparseDistribution::from_weights((0..n_contexts as u32).map(|y| (ContextId(y), counts[y as usize])))
            .unwrap();
        let r =
            SparseDistribution::from_weights((0..n_contexts as u32).map(|y| (ContextId(y), rng.gen_range(0.01..1.0))))
                .unwrap();
        let loglik = sample.iter().map(|&y| r.prob(ContextId(y)).ln()).sum::<f64>() / len as f64;
        let identity = -(q.entropy(LogBase::NATURAL) + kl_divergence(&q, &r, LogBase::NATURAL));
        worst = worst.max((loglik - identity).abs());
    }
    (worst <= 1e-12, format!("200 samples, max deviation {worst:.2e}"))
}

fn confusion_table() -> Outcome {
    let mut corpora = vec![rose()];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    corpora.extend((0..10).map(|_| random_corpus(&mut rng)));
    let (mut worst_row, mut bound_violations, mut entries) = (0.0f64, 0, 0);
    let (mut worst_stated, mut worst_derived) = (0.0f64, 0.0f64);
    for c in &corpora {
        let table = ConfusionTable::build(c);
        let max_unigram = c.context_marginals().iter().copied().max().unwrap() as f64 / c.total() as f64;
        for x in c.usable_objects() {
            worst_row = worst_row.max((table.row(x).iter().map(|e| e.1).sum::<f64>() - 1.0).abs());
            for &(o, p) in table.row(x) {
                entries += 1;
                bound_violations += usize::from(p > 0.5 * max_unigram + 1e-12);
                let ratio = p / table.prob(o, x);
                let (px, po) = (table.object_prob(x), table.object_prob(o));
                worst_stated = worst_stated.max((ratio - px / po).abs());
                worst_derived = worst_derived.max((ratio - po / px).abs());
            }
        }
    }
    (
        worst_row <= 1e-9 && bound_violations == 0 && worst_stated <= 1e-9,
        format!(
            "max |row sum - 1| {worst_row:.2e}; {bound_violations}/{entries} entries exceed max_y P(y)/2; \
             ratio vs P(x)/P(x') max error {worst_stated:.2e}, ratio vs P(x')/P(x) max error {worst_derived:.2e}"
        ),
    )
}

fn purity(state: &ClusterState, labels: &[usize], groups: usize) -> f64 {
    let mut table = vec![vec![0usize; groups]; state.num_clusters()];
    for (x, &g) in labels.iter().enumerate() {
        table[state.hard_assignment(x)][g] += 1;
    }
    table.iter().map(|row| *row.iter().max().unwrap()).sum::<usize>() as f64 / labels.len() as f64
}

fn clustering() -> Outcome {
    let mix = group_mixture(3, 20, 20, 0.9, 0.2, 200, 7).unwrap();
    let data = ClusterData::from_counts(&mix.corpus.counts(), PriorMode::Uniform).unwrap();

    let mut worst_increase = 0.0f64;
    let mut worst_gap = 0.0f64;
    for beta in [1.0, 3.0, 10.0] {
        let probe = probe_twins(
            &data,
            &init_state(&data, beta).unwrap(),
            beta,
            &AnnealingSchedule::default(),
        )
        .unwrap();
        let out = em_fixed_beta(&data, probe.state.clone(), 1e-12, 200).unwrap();
        for w in out.free_energy.windows(2) {
            worst_increase = worst_increase.max(w[1] - w[0]);
        }
        let mut s = probe.state;
        for _ in 0..20 {
            update_memberships(&data, &mut s).unwrap();
            let e = energy_report(&data, &s).unwrap();
            worst_gap = worst_gap.max((e.free_energy - e.free_energy_maxent).abs());
            update_centroids(&data, &mut s).unwrap();
        }
    }

    let mut single = init_state(&data, 5.0).unwrap();
    update_memberships(&data, &mut single).unwrap();
    let exact_one = single.memberships.iter().all(|r| r == &vec![1.0]);

    let start = Instant::now();
    let schedule = AnnealingSchedule {
        beta_max: 30.0,
        ..Default::default()
    };
    let out = anneal(&data, &schedule).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let leaves = out.state.num_clusters();
    let p = purity(&out.state, &mix.labels, 3);
    (
        worst_increase <= 1e-9 && worst_gap <= 1e-9 && exact_one && leaves == 3 && p >= 0.95 && secs < 30.0,
        format!(
            "max F increase {worst_increase:.2e}, max |F - F_maxent| {worst_gap:.2e}, one-centroid memberships exact \
             {exact_one}, {leaves} leaves, purity {p:.3}, anneal {secs:.2}s"
        ),
    )
}

fn phase_transition() -> Outcome {
    let mix = group_mixture(2, 15, 12, 0.9, 0.2, 150, 8).unwrap();
    let data = ClusterData::from_counts(&mix.corpus.counts(), PriorMode::Uniform).unwrap();
    let schedule = AnnealingSchedule {
        beta_max: 20.0,
        ..Default::default()
    };
    let mut merged_below = None;
    let mut split_from = None;
    let mut beta = 0.25;
    while beta <= 20.0 {
        let start = init_state(&data, beta).unwrap();
        let probe = probe_twins(&data, &start, beta, &schedule).unwrap();
        let diverged = probe.divergences[0] >= schedule.split_threshold;
        if diverged && split_from.is_none() {
            split_from = Some(beta);
        }
        if !diverged {
            merged_below = Some(beta);
        }
        beta *= 1.25;
    }
    let out = anneal(&data, &schedule).unwrap();
    let consistent = matches!((merged_below, split_from), (Some(lo), Some(hi)) if lo < hi);
    (
        consistent && out.num_splits() == 1,
        format!(
            "twins re-merge up to beta {merged_below:?}, diverge from beta {split_from:?}; schedule made {} split(s)",
            out.num_splits()
        ),
    )
}

/// Shared state of the synthetic pseudo-word experiment. Every fold shares
/// one training table; fold `i` tests on its own cases and tunes on the
/// cases of the other folds.
struct Experiment {
    train: Arc<PairCounts>,
    backoff: Arc<BackoffModel>,
    cases: Vec<Vec<PseudowordCase>>,
    /// Held-out occurrences per fold whose object and context occur in training.
    events: Vec<Vec<Occurrence>>,
    /// Training counts the neighbor rows are computed from.
    neighbor_counts: PairCounts,
}

const BETAS_A: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
const BETAS_KL: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
const GAMMAS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7];

fn experiment(drop_singletons: bool) -> Experiment {
    let source = LatentClassSource::new(LatentClassConfig {
        objects: EXPERIMENT_OBJECTS,
        contexts: EXPERIMENT_CONTEXTS,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let corpus = source.sample(EXPERIMENT_SAMPLE, 12);
    let cv = split_corpus(
        &corpus,
        &SplitOptions {
            seed: 13,
            ..Default::default()
        },
    )
    .unwrap();
    let train = Arc::clone(&cv.train);
    let backoff = Arc::new(
        BackoffModel::build(
            &train,
            BackoffOptions {
                singletons_as_unseen: drop_singletons,
                ..Default::default()
            },
        )
        .unwrap(),
    );
    let map = PseudowordMap::build(train.context_marginals(), 14).unwrap();
    let cases = cv.folds.iter().map(|f| pseudoword_cases(&train, f, &map)).collect();
    let events = cv
        .folds
        .iter()
        .map(|f| {
            f.iter()
                .copied()
                .filter(|&(x, y)| train.is_usable_object(x) && train.is_usable_context(y))
                .collect()
        })
        .collect();
    let neighbor_counts = if drop_singletons {
        train.filter_singletons()
    } else {
        (*train).clone()
    };
    Experiment {
        train,
        backoff,
        cases,
        events,
        neighbor_counts,
    }
}

fn experiments() -> &'static [Experiment; 2] {
    static CELL: OnceLock<[Experiment; 2]> = OnceLock::new();
    CELL.get_or_init(|| [experiment(false), experiment(true)])
}

/// Picks the best grid point on each fold's tuning data and averages
/// `finish` of the resulting test scores over folds.
fn tuned_average(scores: &[Vec<FoldScore>], finish: fn(f64) -> f64) -> f64 {
    let picks = tune_per_fold(scores).unwrap();
    mean(
        picks
            .iter()
            .enumerate()
            .map(|(i, &best)| finish(scores[best][i].mean())),
    )
}

impl Experiment {
    fn factory(&self, measure: Measure) -> SimFactory {
        let rows = neighbor_distributions(&self.neighbor_counts, &self.backoff, NeighborBase::for_measure(measure));
        let n = self.train.num_objects();
        let graph = build_neighbor_graph(
            &self.neighbor_counts,
            &rows,
            NeighborParams::unrestricted(measure, n, 1.0),
        )
        .unwrap();
        SimFactory {
            backoff: Arc::clone(&self.backoff),
            rows: Arc::new(rows),
            graph: Arc::new(graph),
            options: SimOptions {
                gamma: 0.0,
                on_degenerate: DegeneratePolicy::Unigram,
            },
        }
    }

    fn errors(&self, model: &dyn ConditionalModel) -> Vec<FoldScore> {
        disambiguation_fold_scores(model, &self.cases).unwrap()
    }

    fn unseen_log_perplexities(&self, model: &dyn ConditionalModel) -> Vec<FoldScore> {
        log_loss_fold_scores(model, &self.events, &self.train, true).unwrap()
    }

    fn test_error(&self, model: &dyn ConditionalModel) -> f64 {
        mean(self.errors(model).iter().map(|s| s.mean()))
    }

    fn num_cases(&self) -> usize {
        self.cases.iter().map(Vec::len).sum()
    }

    /// Test error of the similarity model at neighbor count `k`, with beta
    /// and gamma tuned on each fold's tuning cases.
    fn sim_error(&self, measure: Measure, k: usize) -> f64 {
        let factory = self.factory(measure);
        let betas = if measure == Measure::Kl { &BETAS_KL } else { &BETAS_A };
        let grid = sim_grid(&[k], &[f64::INFINITY], betas, &GAMMAS);
        let scores: Vec<Vec<FoldScore>> = grid.iter().map(|p| self.errors(&factory.build(p).unwrap())).collect();
        tuned_average(&scores, |e| e)
    }

    /// Unseen-pair perplexity of Katz and of the tuned similarity model, averaged over folds.
    fn unseen_perplexities(&self, measure: Measure) -> (f64, f64) {
        let factory = self.factory(measure);
        let betas = if measure == Measure::Kl { &BETAS_KL } else { &BETAS_A };
        let n = self.train.num_objects();
        let grid = sim_grid(&[n], &[f64::INFINITY], betas, &[0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9]);
        let scores: Vec<Vec<FoldScore>> = grid
            .iter()
            .map(|p| self.unseen_log_perplexities(&factory.build(p).unwrap()))
            .collect();
        let katz = mean(
            self.unseen_log_perplexities(self.backoff.as_ref())
                .iter()
                .map(|s| s.mean().exp()),
        );
        (katz, tuned_average(&scores, f64::exp))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn pseudoword_experiment() -> Outcome {
    let e = &experiments()[0];
    let n = e.train.num_objects();
    let cases = e.num_cases();
    let mle = e.test_error(&MleModel::new(&e.train));
    let katz = e.test_error(e.backoff.as_ref());
    let a = e.sim_error(Measure::TotalDivergence, n);
    let kl = e.sim_error(Measure::Kl, n);

    let factory = e.factory(Measure::TotalDivergence);
    let reduced = factory
        .build(&SimPoint {
            k: n,
            threshold: f64::INFINITY,
            beta: 4.0,
            gamma: 1.0,
        })
        .unwrap();
    let mut worst = 0.0f64;
    for x in e.train.usable_objects() {
        for y in 0..e.train.num_contexts() as u32 {
            let y = ContextId(y);
            worst = worst.max((reduced.prob(x, y).unwrap() - e.backoff.prob(x, y).unwrap()).abs());
        }
    }
    (
        mle == 0.5 && a < katz && kl < katz && worst <= 1e-15,
        format!(
            "{cases} cases over 5 folds; error MLE {mle:.4}, Katz {katz:.4}, A-weighted {a:.4}, \
             KL-weighted {kl:.4}; gamma=1 max |sim - Katz| {worst:.1e}"
        ),
    )
}

fn neighbor_truncation() -> Outcome {
    let e = &experiments()[0];
    let n = e.train.num_objects();
    let full = e.sim_error(Measure::TotalDivergence, n);
    let tenth = e.sim_error(Measure::TotalDivergence, n / 10);
    let gap = 100.0 * (tenth - full);
    (
        gap.abs() <= 1.5,
        format!(
            "A-weighted error k={n}: {full:.4}, k={}: {tenth:.4}, difference {gap:.2} points",
            n / 10
        ),
    )
}

fn unseen_perplexity() -> Outcome {
    let e = &experiments()[0];
    let (katz, sim) = e.unseen_perplexities(Measure::Kl);
    let reduction = 100.0 * (katz - sim) / katz;
    (
        sim < katz,
        format!("unseen-pair perplexity Katz {katz:.3}, KL-weighted {sim:.3}, reduction {reduction:.2}%"),
    )
}

fn singleton_study() -> Outcome {
    let [kept, dropped] = experiments();
    let n = kept.train.num_objects();
    let mut overlaps = Vec::new();
    for measure in [Measure::TotalDivergence, Measure::L1] {
        let (g1, g2) = (kept.factory(measure).graph, dropped.factory(measure).graph);
        let objects: Vec<ObjectId> = dropped.neighbor_counts.usable_objects().collect();
        overlaps.push(mean(objects.iter().map(|&x| top_overlap(g1.row(x), g2.row(x), 10))));
    }
    let changed = overlaps.iter().all(|&o| o < 1.0);
    let mut errors = Vec::new();
    for e in [kept, dropped] {
        errors.push((
            e.test_error(e.backoff.as_ref()),
            e.sim_error(Measure::TotalDivergence, n),
            e.sim_error(Measure::L1, n),
        ));
    }
    let unigram = UnigramModel::new(&kept.train);
    let uni = kept.test_error(&unigram);
    (
        changed,
        format!(
            "mean top-10 Jaccard A {:.3}, L1 {:.3}; error with singletons Katz {:.4} A {:.4} L1 {:.4}; \
             without singletons Katz {:.4} A {:.4} L1 {:.4}; unigram {uni:.4}",
            overlaps[0], overlaps[1], errors[0].0, errors[0].1, errors[0].2, errors[1].0, errors[1].1, errors[1].2
        ),
    )
}
