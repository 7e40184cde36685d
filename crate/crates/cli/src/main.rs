//! `distsim`: ingest cooccurrence data, train back-off and similarity
//! models, cluster, and run the evaluation harnesses.

mod commands;
mod error;
mod experiment;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use distsim::cluster::PriorMode;
use distsim::simlm::DegeneratePolicy;
use distsim::Measure;

use crate::error::CliError;

/// Default output directory for files whose path is not given.
const OUTPUT_DIR_VAR: &str = "DISTSIM_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "distsim", version, about = "Similarity-based cooccurrence estimation")]
struct Cli {
    /// Seed for every random choice (splits, pseudo-words, annealing perturbations).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; defaults to the available hardware parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a pair file or tokenized text into a count table.
    Ingest(IngestArgs),
    /// Turn tokenized text into a pair file of adjacent word pairs.
    Extract(ExtractArgs),
    /// Train a Katz back-off model.
    TrainBackoff(TrainBackoffArgs),
    /// Build a neighbor graph and the similarity model manifest.
    Neighbors(NeighborsArgs),
    /// Distributional clustering by deterministic annealing.
    Cluster(ClusterArgs),
    /// Print conditional probabilities P(context|object).
    Prob(ProbArgs),
    /// Pseudo-word disambiguation error rates.
    EvalPseudo(EvalPseudoArgs),
    /// Test-set perplexity, overall and on unseen pairs.
    EvalPpl(EvalPplArgs),
    /// Decision task on deleted pairs, including exceptional triples.
    EvalDecision(EvalDecisionArgs),
    /// Tune k, t, beta, gamma by cross-validation.
    GridSearch(GridSearchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    /// `object<TAB>context[<TAB>count]` lines.
    Pairs,
    /// Whitespace-tokenized sentences, one per line; adjacent words form pairs.
    Text,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Pairs)]
    format: InputFormat,
    #[arg(long)]
    lowercase: bool,
    /// Count table (JSON).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    lowercase: bool,
    /// Pair file with counts.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct BackoffArgs {
    /// Counts at or above this are not discounted.
    #[arg(long, default_value_t = 5)]
    ceiling: u64,
    /// Treat pairs seen once as unseen.
    #[arg(long)]
    drop_singletons: bool,
}

#[derive(Debug, Args)]
struct TrainBackoffArgs {
    /// Count table written by `ingest`.
    #[arg(short, long)]
    counts: PathBuf,
    #[command(flatten)]
    backoff: BackoffArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SimArgs {
    /// kl, avg, l1 or conf.
    #[arg(long, default_value = "avg")]
    measure: Measure,
    /// Neighbors per object; defaults to every other object.
    #[arg(long)]
    k: Option<usize>,
    /// Keep neighbors strictly closer than this.
    #[arg(long, default_value_t = f64::INFINITY)]
    threshold: f64,
    #[arg(long, default_value_t = 4.0)]
    beta: f64,
    /// Unigram share of the redistribution model.
    #[arg(long, default_value_t = 0.15)]
    gamma: f64,
    /// Logarithm base of the divergences.
    #[arg(long, default_value_t = 10.0)]
    log_base: f64,
}

#[derive(Debug, Args)]
struct NeighborsArgs {
    /// Count table written by `ingest`.
    #[arg(short, long)]
    counts: PathBuf,
    /// Model from train-backoff; singleton deletion follows its setting.
    #[arg(short, long)]
    backoff: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
    /// What to do when neighbors leave no mass for an object's unseen contexts: error or unigram.
    #[arg(long, default_value = "error")]
    on_degenerate: DegeneratePolicy,
    /// Neighbor graph; the model manifest goes next to it.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Count table written by `ingest`.
    #[arg(short, long)]
    counts: PathBuf,
    /// Cluster only the most frequent objects.
    #[arg(long)]
    top_objects: Option<usize>,
    /// Object prior: uniform or mle.
    #[arg(long, default_value = "uniform")]
    prior: PriorMode,
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    #[arg(long, default_value_t = 1.1)]
    growth: f64,
    #[arg(long, default_value_t = 0.5)]
    shrink: f64,
    #[arg(long, default_value_t = 100.0)]
    beta_max: f64,
    #[arg(long)]
    max_clusters: Option<usize>,
    #[arg(long, default_value_t = 200)]
    max_em_iterations: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    perturbation: f64,
    #[arg(long, default_value_t = 1e-2)]
    split_threshold: f64,
    /// Contexts listed per centroid in the hierarchy file.
    #[arg(long, default_value_t = 10)]
    top_contexts: usize,
    /// Prefix of the hierarchy, membership and snapshot files.
    #[arg(short, long)]
    output_prefix: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProbModel {
    Mle,
    Jm,
    Katz,
    Sim,
}

#[derive(Debug, Args)]
struct ProbArgs {
    /// Count table; not needed with --manifest.
    #[arg(short, long, required_unless_present = "manifest")]
    counts: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProbModel::Mle)]
    model: ProbModel,
    /// Katz model file; built from the counts when absent.
    #[arg(short, long)]
    backoff: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    ceiling: u64,
    /// Interpolation weight of the Jelinek-Mercer model.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Model manifest written by `neighbors`; selects the similarity model.
    #[arg(short, long)]
    manifest: Option<PathBuf>,
    object: String,
    /// Print the whole conditional distribution when absent.
    context: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Fraction of occurrences held out from training.
    #[arg(long, default_value_t = 0.2)]
    heldout: f64,
    /// Keep held-out pairs that also occur in training.
    #[arg(long)]
    all_pairs: bool,
}

#[derive(Debug, Args)]
struct EvalPseudoArgs {
    /// Count table written by `ingest`.
    #[arg(short, long)]
    counts: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    backoff: BackoffArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "unigram")]
    on_degenerate: DegeneratePolicy,
    /// Report table (TSV).
    #[arg(short, long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalPplArgs {
    /// Count table written by `ingest`.
    #[arg(short, long)]
    counts: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    backoff: BackoffArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "unigram")]
    on_degenerate: DegeneratePolicy,
    #[arg(short, long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalDecisionArgs {
    /// Count table written by `ingest`.
    #[arg(short, long)]
    counts: PathBuf,
    /// Pairs to delete from training.
    #[arg(long, default_value_t = 104)]
    deleted: usize,
    /// Context frequency window for deleted pairs.
    #[arg(long, default_value_t = 500)]
    min_freq: u64,
    #[arg(long, default_value_t = 5000)]
    max_freq: u64,
    #[command(flatten)]
    backoff: BackoffArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "unigram")]
    on_degenerate: DegeneratePolicy,
    #[arg(short, long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    /// Pseudo-word disambiguation error.
    Pseudo,
    /// Perplexity on held-out pairs unseen in training.
    PplUnseen,
    /// Perplexity on every held-out pair.
    PplOverall,
}

#[derive(Debug, Args)]
struct GridSearchArgs {
    /// Count table written by `ingest`.
    #[arg(short, long)]
    counts: PathBuf,
    /// kl, avg, l1 or conf.
    #[arg(long, default_value = "avg")]
    measure: Measure,
    /// Comma-separated neighbor counts; defaults to every other object.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    threshold: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.5")]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    log_base: f64,
    #[arg(long, value_enum, default_value_t = Objective::PplUnseen)]
    objective: Objective,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    backoff: BackoffArgs,
    #[arg(long, default_value = "unigram")]
    on_degenerate: DegeneratePolicy,
    /// Prefix of the grid and per-fold reports.
    #[arg(short, long)]
    report_prefix: Option<PathBuf>,
}

/// `$DISTSIM_OUTPUT_DIR/<name>`, or `<name>` in the working directory.
fn default_output(name: &str) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_VAR) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(name),
        _ => PathBuf::from(name),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => commands::ingest(a, seed),
        Command::Extract(a) => commands::extract(a, seed),
        Command::TrainBackoff(a) => commands::train_backoff(a, seed),
        Command::Neighbors(a) => commands::neighbors(a, seed),
        Command::Cluster(a) => commands::cluster(a, seed),
        Command::Prob(a) => commands::prob(a),
        Command::EvalPseudo(a) => commands::eval_pseudo(a, seed),
        Command::EvalPpl(a) => commands::eval_ppl(a, seed),
        Command::EvalDecision(a) => commands::eval_decision(a, seed),
        Command::GridSearch(a) => commands::grid_search(a, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
