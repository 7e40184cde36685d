//! One function per subcommand. Each writes its outputs, a manifest next to
//! the primary output, and a short summary on stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use rayon::prelude::*;

use distsim::cluster::{anneal, write_memberships, AnnealingSchedule, ClusterData};
use distsim::corpus::{ingest_pairs, ingest_tokens, IngestOptions};
use distsim::estimators::{JelinekMercer, LambdaSchedule};
use distsim::eval::{
    build_decision_task, disambiguation_error_rate, disambiguation_fold_scores, log_loss_fold_scores,
    reduction_percent, sim_grid, tune_per_fold, verb_decision_eval, DecisionConfig, FoldScore,
};
use distsim::simlm::{neighbor_distributions, SimOptions};
use distsim::{BackoffModel, ConditionalModel, ContextId, MleModel, NeighborGraph, PairCounts, SimBackoffModel};

use crate::error::{CliError, Result};
use crate::experiment::{build_sim, neighbor_counts, Experiment};
use crate::manifest::{manifest_path_for, read_file, write_file, Loaded, ManifestBuilder, RunManifest};
use crate::{
    default_output, ClusterArgs, EvalDecisionArgs, EvalPplArgs, EvalPseudoArgs, ExtractArgs, GridSearchArgs,
    IngestArgs, InputFormat, NeighborsArgs, Objective, ProbArgs, ProbModel, TrainBackoffArgs,
};

fn value_name<V: ValueEnum>(v: &V) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

/// `<prefix><suffix>`, e.g. `run/grid` + `.folds.tsv`.
fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_counts(path: &Path) -> Result<(PairCounts, Loaded)> {
    let file = read_file(path)?;
    let counts = PairCounts::read_json(file.bytes.as_slice())?;
    Ok((counts, file))
}

fn describe(counts: &PairCounts) -> String {
    format!(
        "{} objects, {} contexts, {} distinct pairs, {} occurrences",
        counts.num_objects(),
        counts.num_contexts(),
        counts.distinct_pairs(),
        counts.total()
    )
}

pub fn ingest(a: IngestArgs, seed: u64) -> Result<()> {
    let input = read_file(&a.input)?;
    let opts = IngestOptions { lowercase: a.lowercase };
    let counts = match a.format {
        InputFormat::Pairs => ingest_pairs(input.bytes.as_slice(), opts)?,
        InputFormat::Text => ingest_tokens(input.bytes.as_slice(), opts)?.counts(),
    };
    let out = a.output.unwrap_or_else(|| default_output("counts.json"));
    let hash = write_file(&out, &counts.to_json_bytes())?;
    let mut m = ManifestBuilder::new("ingest", seed);
    m.param("format", value_name(&a.format))
        .param("lowercase", a.lowercase)
        .input("input", &input)
        .output("counts", &out, hash);
    m.write(&manifest_path_for(&out))?;
    println!("{}: {}", out.display(), describe(&counts));
    Ok(())
}

pub fn extract(a: ExtractArgs, seed: u64) -> Result<()> {
    let input = read_file(&a.input)?;
    let opts = IngestOptions { lowercase: a.lowercase };
    let counts = ingest_tokens(input.bytes.as_slice(), opts)?.counts();
    let mut bytes = Vec::new();
    counts.write_pair_file(&mut bytes)?;
    let out = a.output.unwrap_or_else(|| default_output("pairs.tsv"));
    let hash = write_file(&out, &bytes)?;
    let mut m = ManifestBuilder::new("extract", seed);
    m.param("lowercase", a.lowercase)
        .input("input", &input)
        .output("pairs", &out, hash);
    m.write(&manifest_path_for(&out))?;
    println!("{}: {}", out.display(), describe(&counts));
    Ok(())
}

pub fn train_backoff(a: TrainBackoffArgs, seed: u64) -> Result<()> {
    let (counts, input) = load_counts(&a.counts)?;
    let options = a.backoff.options();
    let model = BackoffModel::build(&counts, options)?;
    let out = a.output.unwrap_or_else(|| default_output("backoff.json"));
    let hash = write_file(&out, &model.to_json_bytes())?;
    let mut m = ManifestBuilder::new("train-backoff", seed);
    m.param("backoff", options)
        .input("counts", &input)
        .output("backoff", &out, hash);
    m.write(&manifest_path_for(&out))?;
    let gt = model.good_turing();
    let discounts: Vec<String> = (1..options.ceiling)
        .map(|c| format!("C*({c})={}", gt.discount(c)))
        .collect();
    println!("{}: Katz model over {}", out.display(), describe(&counts));
    if !discounts.is_empty() {
        println!("discounts: {}", discounts.join(" "));
    }
    Ok(())
}

pub fn neighbors(a: NeighborsArgs, seed: u64) -> Result<()> {
    let (counts, counts_file) = load_counts(&a.counts)?;
    let backoff_file = read_file(&a.backoff)?;
    let backoff = Arc::new(BackoffModel::read_json(backoff_file.bytes.as_slice())?);
    let model = build_sim(&counts, backoff, &a.sim, a.on_degenerate)?;
    let table = neighbor_counts(&counts, model.backoff());
    let graph_bytes = model.graph().to_bytes(counts.objects(), |x| table.is_usable_object(x));
    let out = a.output.unwrap_or_else(|| default_output("neighbors.tsv"));
    let graph_hash = write_file(&out, &graph_bytes)?;

    let mut m = ManifestBuilder::new("neighbors", seed);
    m.param("sim", model.graph().params)
        .param("gamma", a.sim.gamma)
        .param("on_degenerate", a.on_degenerate)
        .input("counts", &counts_file)
        .input("backoff", &backoff_file)
        .output("graph", &out, graph_hash.clone())
        .model(model.manifest(backoff_file.sha256.clone(), graph_hash));
    m.write(&manifest_path_for(&out))?;

    let n = counts.num_objects();
    let edges: usize = (0..n)
        .map(|x| model.graph().row(distsim::ObjectId(x as u32)).len())
        .sum();
    println!(
        "{}: {} neighbors, {:.2} per object ({} measure)",
        out.display(),
        edges,
        edges as f64 / n as f64,
        a.sim.measure
    );
    if model.unigram_fallbacks() > 0 {
        println!("{} objects redistribute by the unigram", model.unigram_fallbacks());
    }
    println!("model manifest: {}", manifest_path_for(&out).display());
    Ok(())
}

pub fn cluster(a: ClusterArgs, seed: u64) -> Result<()> {
    let (counts, input) = load_counts(&a.counts)?;
    let table = match a.top_objects {
        Some(n) => counts.truncate_objects(n),
        None => counts,
    };
    let data = ClusterData::from_counts(&table, a.prior)?;
    let schedule = AnnealingSchedule {
        beta0: a.beta0,
        growth: a.growth,
        shrink: a.shrink,
        beta_max: a.beta_max,
        max_em_iterations: a.max_em_iterations,
        tol: a.tol,
        perturbation_eps: a.perturbation,
        split_threshold: a.split_threshold,
        seed,
        max_clusters: a.max_clusters.unwrap_or(usize::MAX),
    };
    schedule.validate()?;
    let result = anneal(&data, &schedule)?;

    let prefix = a.output_prefix.unwrap_or_else(|| default_output("cluster"));
    let mut hierarchy = Vec::new();
    result.write_hierarchy(&mut hierarchy, table.contexts(), a.top_contexts)?;
    let mut memberships = Vec::new();
    write_memberships(&mut memberships, &data, &result.state, table.objects())?;
    let mut snapshots = String::from("beta\tclusters\tdistortion\tentropy\tfree_energy\n");
    for s in &result.snapshots {
        let e = s.energy;
        writeln!(
            snapshots,
            "{}\t{}\t{}\t{}\t{}",
            s.beta,
            s.state.num_clusters(),
            e.distortion,
            e.entropy,
            e.free_energy
        )
        .expect("string write");
    }

    let mut m = ManifestBuilder::new("cluster", seed);
    m.param("schedule", schedule)
        .param("prior", a.prior)
        .param("top_objects", a.top_objects)
        .param("top_contexts", a.top_contexts)
        .input("counts", &input);
    for (role, suffix, bytes) in [
        ("hierarchy", ".hierarchy.txt", hierarchy.as_slice()),
        ("memberships", ".memberships.tsv", memberships.as_slice()),
        ("snapshots", ".snapshots.tsv", snapshots.as_bytes()),
    ] {
        let path = with_suffix(&prefix, suffix);
        let hash = write_file(&path, bytes)?;
        m.output(role, &path, hash);
    }
    m.write(&with_suffix(&prefix, ".manifest.json"))?;
    println!(
        "{} objects, {} clusters after {} splits, final beta {}",
        data.len(),
        result.state.num_clusters(),
        result.num_splits(),
        result.state.beta
    );
    println!(
        "outputs: {}.{{hierarchy.txt,memberships.tsv,snapshots.tsv}}",
        prefix.display()
    );
    Ok(())
}

/// Rebuilds the similarity model recorded by `neighbors`, checking every file against its digest.
fn sim_from_manifest(path: &Path) -> Result<(PairCounts, SimBackoffModel)> {
    let (manifest, base) = RunManifest::read(path)?;
    let model = manifest
        .model
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{} is not a model manifest", path.display())))?;
    let counts_file = manifest.load_verified("counts", &base)?;
    let backoff_file = manifest.load_verified("backoff", &base)?;
    let graph_file = manifest.load_verified("graph", &base)?;
    if model.backoff_hash != backoff_file.sha256 {
        return Err(CliError::Integrity(format!(
            "model records back-off hash {} but the back-off file hashes to {}",
            model.backoff_hash, backoff_file.sha256
        )));
    }
    if model.graph_hash != graph_file.sha256 {
        return Err(CliError::Integrity(format!(
            "model records neighbor-graph hash {} but the graph file hashes to {}",
            model.graph_hash, graph_file.sha256
        )));
    }
    let counts = PairCounts::read_json(counts_file.bytes.as_slice())?;
    let backoff = BackoffModel::read_json(backoff_file.bytes.as_slice())?;
    let graph = NeighborGraph::read(graph_file.bytes.as_slice(), counts.objects())?;
    let p = &graph.params;
    if p.measure != model.measure || p.k != model.k || p.threshold != model.threshold || p.beta != model.beta {
        return Err(CliError::Integrity(
            "neighbor-graph header disagrees with the model manifest".into(),
        ));
    }
    let table = neighbor_counts(&counts, &backoff);
    let rows = neighbor_distributions(&table, &backoff, model.neighbor_base);
    let options = SimOptions {
        gamma: model.gamma,
        on_degenerate: model.on_degenerate,
    };
    let sim = SimBackoffModel::new(Arc::new(backoff), Arc::new(rows), Arc::new(graph), options)?;
    Ok((counts, sim))
}

fn print_probs(counts: &PairCounts, model: &dyn ConditionalModel, object: &str, context: Option<&str>) -> Result<()> {
    let unknown = |w: &str| CliError::Core(distsim::Error::UnknownWord(w.to_string()));
    let x = counts.object_id(object).ok_or_else(|| unknown(object))?;
    match context {
        Some(c) => {
            let y = counts.context_id(c).ok_or_else(|| unknown(c))?;
            println!("{}", model.prob(x, y)?);
        }
        None => {
            for y in 0..counts.num_contexts() as u32 {
                let p = model.prob(x, ContextId(y))?;
                println!("{}\t{p}", counts.contexts().surface(y));
            }
        }
    }
    Ok(())
}

pub fn prob(a: ProbArgs) -> Result<()> {
    if let Some(path) = &a.manifest {
        let (counts, model) = sim_from_manifest(path)?;
        return print_probs(&counts, &model, &a.object, a.context.as_deref());
    }
    let path = a.counts.as_ref().expect("clap requires counts without a manifest");
    let (counts, _) = load_counts(path)?;
    let model: Box<dyn ConditionalModel + '_> = match a.model {
        ProbModel::Mle => Box::new(MleModel::new(&counts)),
        ProbModel::Jm => Box::new(JelinekMercer::new(&counts, LambdaSchedule::constant(a.lambda)?)),
        ProbModel::Katz => match &a.backoff {
            Some(p) => Box::new(BackoffModel::read_json(read_file(p)?.bytes.as_slice())?),
            None => Box::new(BackoffModel::build(
                &counts,
                distsim::BackoffOptions {
                    ceiling: a.ceiling,
                    ..Default::default()
                },
            )?),
        },
        ProbModel::Sim => {
            return Err(CliError::Usage(
                "the similarity model is loaded from the manifest written by `neighbors`; pass --manifest".into(),
            ))
        }
    };
    print_probs(&counts, model.as_ref(), &a.object, a.context.as_deref())
}

/// Pooled mean of fold scores.
fn pooled(scores: &[FoldScore]) -> FoldScore {
    scores.iter().fold(FoldScore::default(), |acc, s| FoldScore {
        total: acc.total + s.total,
        n: acc.n + s.n,
    })
}

pub fn eval_pseudo(a: EvalPseudoArgs, seed: u64) -> Result<()> {
    let (counts, input) = load_counts(&a.counts)?;
    let exp = Experiment::prepare(&counts, &a.split, &a.backoff, seed)?;
    let cases = exp.pseudo_cases(seed)?;
    let point = a.sim.point(counts.num_objects());
    let sim = exp
        .factory(a.sim.measure, a.sim.log_base, a.on_degenerate)?
        .build(&point)?;
    let mle = MleModel::new(&exp.cv.train);
    let sim_name = format!("sim-{}", a.sim.measure);
    let models: [(&str, &dyn ConditionalModel); 3] = [("mle", &mle), ("katz", exp.backoff.as_ref()), (&sim_name, &sim)];

    let mut report = String::from("model\tfold\tn\terrors\tties\terror_rate\n");
    let mut summary = Vec::new();
    for (name, model) in models {
        let (mut n, mut errors, mut ties) = (0, 0, 0);
        for (f, fold) in cases.iter().enumerate() {
            if fold.is_empty() {
                continue;
            }
            let r = disambiguation_error_rate(model, fold)?;
            writeln!(report, "{name}\t{f}\t{}\t{}\t{}\t{}", r.n, r.errors, r.ties, r.value).expect("string write");
            (n, errors, ties) = (n + r.n, errors + r.errors, ties + r.ties);
        }
        if n == 0 {
            return Err(distsim::Error::EmptyTestSet.into());
        }
        let rate = (errors as f64 + ties as f64 / 2.0) / n as f64;
        writeln!(report, "{name}\tall\t{n}\t{errors}\t{ties}\t{rate}").expect("string write");
        summary.push((name.to_string(), rate, n));
    }

    let out = a.report.unwrap_or_else(|| default_output("pseudo.tsv"));
    let hash = write_file(&out, report.as_bytes())?;
    let mut m = ManifestBuilder::new("eval-pseudo", seed);
    m.param("split", split_params(&a.split))
        .param("backoff", a.backoff.options())
        .param("measure", a.sim.measure)
        .param("point", point)
        .param("log_base", a.sim.log_base)
        .param("on_degenerate", a.on_degenerate)
        .input("counts", &input)
        .output("report", &out, hash);
    m.write(&manifest_path_for(&out))?;
    for (name, rate, n) in summary {
        println!("{name:<10} error {rate:.4} over {n} cases");
    }
    println!("report: {}", out.display());
    Ok(())
}

fn split_params(s: &crate::SplitArgs) -> serde_json::Value {
    serde_json::json!({ "folds": s.folds, "heldout": s.heldout, "unseen_only": !s.all_pairs })
}

pub fn eval_ppl(a: EvalPplArgs, seed: u64) -> Result<()> {
    let (counts, input) = load_counts(&a.counts)?;
    let exp = Experiment::prepare(&counts, &a.split, &a.backoff, seed)?;
    let point = a.sim.point(counts.num_objects());
    let sim = exp
        .factory(a.sim.measure, a.sim.log_base, a.on_degenerate)?
        .build(&point)?;
    let sim_name = format!("sim-{}", a.sim.measure);
    let models: [(&str, &dyn ConditionalModel); 2] = [("katz", exp.backoff.as_ref()), (&sim_name, &sim)];
    let train = &exp.cv.train;

    let mut report = String::from("model\tfold\tn\tperplexity\tn_unseen\tunseen_perplexity\n");
    let mut pooled_values = Vec::new();
    for (name, model) in models {
        let overall = log_loss_fold_scores(model, &exp.cv.folds, train, false)?;
        let unseen = log_loss_fold_scores(model, &exp.cv.folds, train, true)?;
        let mut row = |fold: &str, o: FoldScore, u: FoldScore| {
            writeln!(
                report,
                "{name}\t{fold}\t{}\t{}\t{}\t{}",
                o.n,
                o.mean().exp(),
                u.n,
                u.mean().exp()
            )
            .expect("string write");
        };
        for (f, (&o, &u)) in overall.iter().zip(&unseen).enumerate() {
            row(&f.to_string(), o, u);
        }
        let (o, u) = (pooled(&overall), pooled(&unseen));
        if o.n == 0 {
            return Err(distsim::Error::EmptyTestSet.into());
        }
        row("all", o, u);
        pooled_values.push((name.to_string(), o, u));
    }

    let out = a.report.unwrap_or_else(|| default_output("ppl.tsv"));
    let hash = write_file(&out, report.as_bytes())?;
    let mut m = ManifestBuilder::new("eval-ppl", seed);
    m.param("split", split_params(&a.split))
        .param("backoff", a.backoff.options())
        .param("measure", a.sim.measure)
        .param("point", point)
        .param("log_base", a.sim.log_base)
        .param("on_degenerate", a.on_degenerate)
        .input("counts", &input)
        .output("report", &out, hash);
    m.write(&manifest_path_for(&out))?;
    for (name, o, u) in &pooled_values {
        println!(
            "{name:<10} perplexity {:.4} over {} events, unseen {:.4} over {}",
            o.mean().exp(),
            o.n,
            u.mean().exp(),
            u.n
        );
    }
    let (k, s) = (&pooled_values[0], &pooled_values[1]);
    println!(
        "reduction: overall {:.2}%, unseen {:.2}%",
        reduction_percent(k.1.mean().exp(), s.1.mean().exp()),
        reduction_percent(k.2.mean().exp(), s.2.mean().exp())
    );
    println!("report: {}", out.display());
    Ok(())
}

pub fn eval_decision(a: EvalDecisionArgs, seed: u64) -> Result<()> {
    let (counts, input) = load_counts(&a.counts)?;
    let cfg = DecisionConfig {
        deleted: a.deleted,
        min_context_freq: a.min_freq,
        max_context_freq: a.max_freq,
        seed,
    };
    let task = build_decision_task(&counts, &cfg)?;
    let backoff = Arc::new(BackoffModel::build(&task.train, a.backoff.options())?);
    let sim = build_sim(&task.train, Arc::clone(&backoff), &a.sim, a.on_degenerate)?;
    let sim_name = format!("sim-{}", a.sim.measure);
    let models: [(&str, &dyn ConditionalModel); 2] = [("katz", backoff.as_ref()), (&sim_name, &sim)];

    let mut report = String::from("model\tsubset\tn\terrors\terror_rate\n");
    let mut summary = Vec::new();
    for (name, model) in models {
        let r = verb_decision_eval(model, &task.triples)?;
        for (subset, e) in [("all", &r.all), ("exceptional", &r.exceptional)] {
            writeln!(report, "{name}\t{subset}\t{}\t{}\t{}", e.n, e.errors, e.value).expect("string write");
        }
        summary.push((name.to_string(), r));
    }

    let out = a.report.unwrap_or_else(|| default_output("decision.tsv"));
    let hash = write_file(&out, report.as_bytes())?;
    let mut m = ManifestBuilder::new("eval-decision", seed);
    m.param("deleted", a.deleted)
        .param("min_freq", a.min_freq)
        .param("max_freq", a.max_freq)
        .param("backoff", a.backoff.options())
        .param("sim", a.sim.neighbor_params(counts.num_objects())?)
        .param("gamma", a.sim.gamma)
        .param("on_degenerate", a.on_degenerate)
        .input("counts", &input)
        .output("report", &out, hash);
    m.write(&manifest_path_for(&out))?;
    println!(
        "{} deleted pairs, {} decision triples",
        task.deleted.len(),
        task.triples.len()
    );
    for (name, r) in summary {
        println!(
            "{name:<10} error {:.4} (all, n={}), {:.4} (exceptional, n={})",
            r.all.value, r.all.n, r.exceptional.value, r.exceptional.n
        );
    }
    println!("report: {}", out.display());
    Ok(())
}

pub fn grid_search(a: GridSearchArgs, seed: u64) -> Result<()> {
    let (counts, input) = load_counts(&a.counts)?;
    let exp = Experiment::prepare(&counts, &a.split, &a.backoff, seed)?;
    let factory = exp.factory(a.measure, a.log_base, a.on_degenerate)?;
    let n = counts.num_objects();
    let ks: Vec<usize> = if a.k.is_empty() {
        vec![n]
    } else {
        a.k.iter().map(|&k| k.min(n)).collect()
    };
    let grid = sim_grid(&ks, &a.threshold, &a.beta, &a.gamma);
    let cases = match a.objective {
        Objective::Pseudo => exp.pseudo_cases(seed)?,
        _ => Vec::new(),
    };
    let train = &exp.cv.train;
    let score = |model: &dyn ConditionalModel| -> distsim::Result<Vec<FoldScore>> {
        match a.objective {
            Objective::Pseudo => disambiguation_fold_scores(model, &cases),
            Objective::PplUnseen => log_loss_fold_scores(model, &exp.cv.folds, train, true),
            Objective::PplOverall => log_loss_fold_scores(model, &exp.cv.folds, train, false),
        }
    };
    let finish = |s: FoldScore| match a.objective {
        Objective::Pseudo => s.mean(),
        _ => s.mean().exp(),
    };

    let folds = exp.cv.num_folds();
    let outcomes: Vec<std::result::Result<Vec<FoldScore>, String>> = grid
        .par_iter()
        .map(|p| factory.build(p).and_then(|m| score(&m)).map_err(|e| e.to_string()))
        .collect();
    let failed = vec![
        FoldScore {
            total: f64::INFINITY,
            n: 1
        };
        folds
    ];
    let scores: Vec<Vec<FoldScore>> = outcomes.iter().map(|o| o.as_ref().unwrap_or(&failed).clone()).collect();
    if outcomes.iter().all(|o| o.is_err()) {
        let reason = outcomes[0].as_ref().err().cloned().unwrap_or_default();
        return Err(CliError::Core(distsim::Error::InvalidParameter(format!(
            "every grid point failed; first: {reason}"
        ))));
    }
    let picks = tune_per_fold(&scores)?;
    let katz = score(exp.backoff.as_ref())?;

    let mut grid_report = String::from("k\tt\tbeta\tgamma\tpooled");
    for f in 0..folds {
        write!(grid_report, "\tfold{f}").expect("string write");
    }
    grid_report.push_str("\tfailure\n");
    for (p, o) in grid.iter().zip(&outcomes) {
        let s = o.as_ref().unwrap_or(&failed);
        write!(
            grid_report,
            "{}\t{}\t{}\t{}\t{}",
            p.k,
            p.threshold,
            p.beta,
            p.gamma,
            finish(pooled(s))
        )
        .expect("string write");
        for &fs in s {
            write!(grid_report, "\t{}", finish(fs)).expect("string write");
        }
        writeln!(grid_report, "\t{}", o.as_ref().err().map_or("-", String::as_str)).expect("string write");
    }

    let mut fold_report = String::from("fold\tk\tt\tbeta\tgamma\tn\tvalue\tkatz\treduction_pct\n");
    let (mut tuned, mut base) = (FoldScore::default(), FoldScore::default());
    for (f, &pick) in picks.iter().enumerate() {
        let (p, s) = (grid[pick], scores[pick][f]);
        writeln!(
            fold_report,
            "{f}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.k,
            p.threshold,
            p.beta,
            p.gamma,
            s.n,
            finish(s),
            finish(katz[f]),
            reduction_percent(finish(katz[f]), finish(s))
        )
        .expect("string write");
        tuned = pooled(&[tuned, s]);
        base = pooled(&[base, katz[f]]);
    }

    let prefix = a.report_prefix.unwrap_or_else(|| default_output("grid"));
    let mut m = ManifestBuilder::new("grid-search", seed);
    m.param("split", split_params(&a.split))
        .param("backoff", a.backoff.options())
        .param("measure", a.measure)
        .param("k", &ks)
        .param("threshold", &a.threshold)
        .param("beta", &a.beta)
        .param("gamma", &a.gamma)
        .param("log_base", a.log_base)
        .param("objective", value_name(&a.objective))
        .param("on_degenerate", a.on_degenerate)
        .input("counts", &input);
    for (role, suffix, text) in [
        ("grid", ".grid.tsv", &grid_report),
        ("folds", ".folds.tsv", &fold_report),
    ] {
        let path = with_suffix(&prefix, suffix);
        let hash = write_file(&path, text.as_bytes())?;
        m.output(role, &path, hash);
    }
    m.write(&with_suffix(&prefix, ".manifest.json"))?;

    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    println!(
        "{} grid points ({failures} failed), {folds} folds, objective {}",
        grid.len(),
        value_name(&a.objective)
    );
    for (f, &pick) in picks.iter().enumerate() {
        let p = grid[pick];
        println!(
            "fold {f}: k={} t={} beta={} gamma={} -> {:.4} (Katz {:.4})",
            p.k,
            p.threshold,
            p.beta,
            p.gamma,
            finish(scores[pick][f]),
            finish(katz[f])
        );
    }
    println!(
        "tuned {:.4} vs Katz {:.4}: {:.2}% reduction",
        finish(tuned),
        finish(base),
        reduction_percent(finish(base), finish(tuned))
    );
    println!("reports: {}.{{grid.tsv,folds.tsv}}", prefix.display());
    Ok(())
}
