use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use distsim::similarity::{cosine, kendall_tau, kl_divergence, l1_distance, total_divergence_to_mean};
use distsim::simlm::{build_neighbor_graph, neighbor_distributions, NeighborBase};
use distsim::{BackoffModel, BackoffOptions, LogBase, Measure, NeighborParams};
use distsim_bench::{latent_counts, rows};

fn distances(c: &mut Criterion) {
    let counts = latent_counts(200, 500, 100_000, 1);
    let (mle, smooth) = rows(&counts, 50);
    let pairs = || mle.iter().zip(mle.iter().skip(1));
    let mut g = c.benchmark_group("distance");
    g.bench_function("total_divergence", |b| {
        b.iter(|| {
            pairs()
                .map(|(q, r)| total_divergence_to_mean(q, r, LogBase::TEN))
                .sum::<f64>()
        })
    });
    g.bench_function("l1", |b| {
        b.iter(|| pairs().map(|(q, r)| l1_distance(q, r)).sum::<f64>())
    });
    g.bench_function("cosine", |b| {
        b.iter(|| pairs().map(|(q, r)| cosine(q, r).unwrap()).sum::<f64>())
    });
    g.bench_function("kl_smoothed", |b| {
        b.iter(|| {
            smooth
                .iter()
                .zip(smooth.iter().skip(1))
                .map(|(q, r)| kl_divergence(q, r, LogBase::TEN))
                .sum::<f64>()
        })
    });
    g.bench_function("kendall_tau", |b| {
        b.iter(|| pairs().map(|(q, r)| kendall_tau(q, r, 500).unwrap()).sum::<f64>())
    });
    g.finish();
}

fn neighbor_graphs(c: &mut Criterion) {
    let counts = latent_counts(300, 200, 60_000, 2);
    let katz = BackoffModel::build(&counts, BackoffOptions::default()).unwrap();
    let mut g = c.benchmark_group("neighbor_graph");
    g.sample_size(10);
    for measure in [Measure::TotalDivergence, Measure::L1, Measure::Kl, Measure::Confusion] {
        let rows = neighbor_distributions(&counts, &katz, NeighborBase::for_measure(measure));
        let params = NeighborParams {
            k: 50,
            ..NeighborParams::unrestricted(measure, counts.num_objects(), 4.0)
        };
        g.bench_function(measure.tag(), |b| {
            b.iter(|| build_neighbor_graph(black_box(&counts), &rows, params).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, distances, neighbor_graphs);
criterion_main!(benches);
