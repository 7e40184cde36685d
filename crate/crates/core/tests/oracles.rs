//! Estimators checked against straightforward dense reimplementations.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distsim::corpus::{ingest_pairs, ingest_tokens, IngestOptions};
use distsim::simlm::SimOptions;
use distsim::{
    BackoffModel, BackoffOptions, ConditionalModel, ContextId, Measure, NeighborParams, ObjectId, PairCounts,
    SimBackoffModel,
};

fn random_corpus(seed: u64) -> PairCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = rng.gen_range(2..15);
    let contexts = rng.gen_range(4..25);
    let mut text = String::new();
    for _ in 0..rng.gen_range(10..120) {
        let c = if rng.gen_bool(0.6) { 1 } else { rng.gen_range(1..9) };
        text.push_str(&format!(
            "x{}\ty{}\t{c}\n",
            rng.gen_range(0..objects),
            rng.gen_range(0..contexts)
        ));
    }
    ingest_pairs(text.as_bytes(), IngestOptions::default()).unwrap()
}

/// Dense counts, row sums, and unigram.
struct Dense {
    c: Vec<Vec<f64>>,
    cx: Vec<f64>,
    unigram: Vec<f64>,
}

fn dense(counts: &PairCounts) -> Dense {
    let (nx, ny) = (counts.num_objects(), counts.num_contexts());
    let mut c = vec![vec![0.0; ny]; nx];
    for (x, y, n) in counts.iter_pairs() {
        c[x.index()][y.index()] = n as f64;
    }
    let cx: Vec<f64> = c.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = cx.iter().sum();
    let unigram = (0..ny).map(|y| c.iter().map(|r| r[y]).sum::<f64>() / total).collect();
    Dense { c, cx, unigram }
}

fn good_turing(d: &Dense, ceiling: usize) -> Vec<f64> {
    let mut n = vec![0.0; ceiling + 2];
    for row in &d.c {
        for &v in row {
            if v > 0.0 && (v as usize) < n.len() {
                n[v as usize] += 1.0;
            }
        }
    }
    let mut star = vec![0.0; ceiling];
    for c in 1..ceiling {
        let raw = if n[c] == 0.0 || n[c + 1] == 0.0 {
            c as f64
        } else {
            ((c + 1) as f64 * n[c + 1] / n[c]).min(c as f64)
        };
        star[c] = raw.max(star[c - 1]);
    }
    star
}

/// Katz with redistribution `pr(x, y)`; returns `P(y|x)` for every pair.
fn katz_with(d: &Dense, pr: &dyn Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    let star = good_turing(d, 5);
    let ny = d.unigram.len();
    let usable = d.unigram.iter().filter(|&&p| p > 0.0).count();
    d.c.iter()
        .enumerate()
        .map(|(x, row)| {
            let mut p: Vec<f64> = row
                .iter()
                .map(|&v| {
                    if v == 0.0 {
                        0.0
                    } else if (v as usize) < 5 {
                        star[v as usize] / d.cx[x]
                    } else {
                        v / d.cx[x]
                    }
                })
                .collect();
            let seen = row.iter().filter(|&&v| v > 0.0).count();
            let mass: f64 = p.iter().sum();
            if seen == usable {
                return p.iter().map(|v| v / mass).collect();
            }
            let leftover = 1.0 - mass;
            let seen_pr: f64 = (0..ny).filter(|&y| row[y] > 0.0).map(|y| pr(x, y)).sum();
            let alpha = leftover / (1.0 - seen_pr);
            for y in 0..ny {
                if row[y] == 0.0 {
                    p[y] = alpha * pr(x, y);
                }
            }
            p
        })
        .collect()
}

fn check_model(counts: &PairCounts, model: &dyn ConditionalModel, expect: &[Vec<f64>], tol: f64) {
    for x in counts.usable_objects() {
        for y in 0..counts.num_contexts() {
            let got = model.prob(x, ContextId(y as u32)).unwrap();
            let want = expect[x.index()][y];
            assert!(
                (got - want).abs() <= tol,
                "P({y}|{}) = {got}, oracle {want}, oracle row sum {}",
                x.0,
                expect[x.index()].iter().sum::<f64>()
            );
        }
    }
}

#[test]
fn katz_matches_dense_oracle() {
    for seed in 0..200 {
        let counts = random_corpus(seed);
        let d = dense(&counts);
        let expect = katz_with(&d, &|_, y| d.unigram[y]);
        let model = BackoffModel::build(&counts, BackoffOptions::default()).unwrap();
        check_model(&counts, &model, &expect, 1e-12);
    }
}

#[test]
fn katz_on_rose() {
    let counts = ingest_tokens("a rose is a rose is not a nose".as_bytes(), IngestOptions::default())
        .unwrap()
        .counts();
    let model = BackoffModel::build(&counts, BackoffOptions::default()).unwrap();
    // n_1 = 4, n_2 = 2: C*(1) = 1, C*(2) = min(3 n_3 / n_2, 2) falls back to 2
    let d = dense(&counts);
    let expect = katz_with(&d, &|_, y| d.unigram[y]);
    check_model(&counts, &model, &expect, 1e-15);
    let (a, rose) = (counts.object_id("a").unwrap(), counts.context_id("rose").unwrap());
    assert_eq!(model.prob(a, rose).unwrap(), 2.0 / 3.0);
}

#[test]
fn l1_sim_backoff_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..100 {
        let counts = random_corpus(1000 + seed);
        let d = dense(&counts);
        let beta = rng.gen_range(0.5..6.0);
        let gamma = rng.gen_range(0.05..1.0);
        let nx = d.c.len();
        let mle = |x: usize, y: usize| d.c[x][y] / d.cx[x];
        let l1 = |a: usize, b: usize| (0..d.unigram.len()).map(|y| (mle(a, y) - mle(b, y)).abs()).sum::<f64>();
        let pr = |x: usize, y: usize| {
            let (mut num, mut den) = (0.0, 0.0);
            for o in (0..nx).filter(|&o| o != x && d.cx[o] > 0.0) {
                // disjoint rows are exactly 2 apart; dense summation only gets close
                let disjoint = (0..d.unigram.len()).all(|y| d.c[x][y] == 0.0 || d.c[o][y] == 0.0);
                let w = if disjoint {
                    0.0
                } else {
                    (2.0 - l1(x, o)).max(0.0).powf(beta)
                };
                num += w * mle(o, y);
                den += w;
            }
            if den > 0.0 {
                gamma * d.unigram[y] + (1.0 - gamma) * num / den
            } else {
                d.unigram[y]
            }
        };
        let expect = katz_with(&d, &pr);
        let backoff = Arc::new(BackoffModel::build(&counts, BackoffOptions::default()).unwrap());
        let params = NeighborParams::unrestricted(Measure::L1, counts.num_objects(), beta);
        let model = SimBackoffModel::from_counts(&counts, backoff, params, SimOptions::new(gamma)).unwrap();
        check_model(&counts, &model, &expect, 1e-12);
    }
}

#[test]
fn unseen_object_is_rejected() {
    let counts = random_corpus(5);
    let model = BackoffModel::build(&counts, BackoffOptions::default()).unwrap();
    let beyond = ObjectId(counts.num_objects() as u32);
    assert!(model.prob(beyond, ContextId(0)).is_err());
}
