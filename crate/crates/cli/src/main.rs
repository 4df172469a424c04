//! `cascade`: build, measure, fit, cluster and compare information cascades.

mod commands;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cascade_structure::fit::Weighting;
use cascade_structure::Metric;

use crate::failure::{Failure, ResultExt};
use crate::output::{Manifest, OutputDir};

#[derive(Debug, Parser)]
#[command(
    name = "cascade",
    version,
    about = "Structural analytics for information cascades"
)]
struct Cli {
    /// Root seed for every random stream (synth defaults to the spec's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory receiving outputs and manifest.json.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reconstruct cascades from an event TSV into a binary store.
    Build(BuildArgs),
    /// Structural metric table and direction Venn tallies.
    Metrics(MetricsArgs),
    /// Log-binned PDF of one metric and a bimodal law fit.
    Dist(DistArgs),
    /// Cluster normalized growth curves with k-means.
    Dynamics(DynamicsArgs),
    /// Kruskal-Wallis tests and pairwise distinguishability between groups.
    Stats(StatsArgs),
    /// Joint histogram of two metrics with boundary curves.
    Joint(JointArgs),
    /// Generate a synthetic corpus with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    /// Event TSV: cascade_id, post_id, actor, source, timestamp.
    pub events: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsArgs {
    /// Store directory written by `build`.
    pub store: PathBuf,
    /// Largest root component with an exact trend.
    #[arg(long, default_value_t = 10_000)]
    pub exact_threshold: usize,
    /// BFS sources of the sampled trend estimator.
    #[arg(long, default_value_t = 1_000)]
    pub sample_sources: usize,
    /// Count the original post in average activity.
    #[arg(long)]
    pub include_original_post: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingArg {
    Poisson,
    Uniform,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Poisson => Weighting::Poisson,
            WeightingArg::Uniform => Weighting::Uniform,
        }
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse()
        .map_err(|e: cascade_structure::Error| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct DistArgs {
    /// Metric table written by `metrics`.
    pub metrics: PathBuf,
    /// Metric column to fit.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Metric,
    /// Fit the power-law term alone.
    #[arg(long)]
    pub fix_c2_zero: bool,
    #[arg(long, default_value_t = 10)]
    pub bins_per_decade: u32,
    /// Least-squares weighting of the binned densities.
    #[arg(long, value_enum, default_value_t = WeightingArg::Poisson)]
    pub weighting: WeightingArg,
}

#[derive(Debug, Args, Serialize)]
pub struct DynamicsArgs {
    /// Store directory written by `build`.
    pub store: PathBuf,
    #[arg(long, default_value_t = 9)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
    /// Cascades below this mass are skipped.
    #[arg(long, default_value_t = 100)]
    pub min_mass: usize,
    /// Growth series bin width in seconds.
    #[arg(long, default_value_t = 60)]
    pub time_unit: i64,
    #[arg(long, default_value_t = 10)]
    pub n_init: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Metric table written by `metrics`.
    pub metrics: PathBuf,
    /// Group labels: `cascade_id<TAB>label`, an assignments file or a truth sidecar.
    #[arg(long)]
    pub labels: PathBuf,
    /// Name of the grouping, written to kw.tsv.
    #[arg(long, default_value = "labels")]
    pub group_source: String,
    /// Smallest group used for distinguishability.
    #[arg(long, default_value_t = 50)]
    pub min_group: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct JointArgs {
    /// Metric table written by `metrics`.
    pub metrics: PathBuf,
    #[arg(long, value_parser = parse_metric)]
    pub x: Metric,
    #[arg(long, value_parser = parse_metric)]
    pub y: Metric,
    #[arg(long, default_value_t = 10)]
    pub bins_per_decade: u32,
    /// Bins of linear (ratio) axes.
    #[arg(long, default_value_t = 20)]
    pub linear_bins: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Corpus spec JSON.
    pub spec: PathBuf,
}

/// What a command reports for the manifest.
pub struct Outcome {
    pub seed: u64,
    pub knobs: serde_json::Value,
    pub inputs: Vec<output::FileDigest>,
    pub summary: serde_json::Value,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::input(anyhow::anyhow!(
                "--threads must be positive"
            )));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .input()?;
    }
    let out = OutputDir::acquire(&cli.output_dir)?;
    let (name, outcome) = match &cli.command {
        Command::Build(a) => ("build", commands::build(a, cli.seed, &out)?),
        Command::Metrics(a) => ("metrics", commands::metrics(a, cli.seed, &out)?),
        Command::Dist(a) => ("dist", commands::dist(a, cli.seed, &out)?),
        Command::Dynamics(a) => ("dynamics", commands::dynamics(a, cli.seed, &out)?),
        Command::Stats(a) => ("stats", commands::stats(a, cli.seed, &out)?),
        Command::Joint(a) => ("joint", commands::joint(a, cli.seed, &out)?),
        Command::Synth(a) => ("synth", commands::synth(a, cli.seed, &out)?),
    };
    out.commit(Manifest {
        command: name.to_owned(),
        version: env!("CARGO_PKG_VERSION"),
        seed: outcome.seed,
        threads: cli.threads,
        knobs: outcome.knobs,
        inputs: outcome.inputs,
        summary: outcome.summary,
        outputs: Vec::new(),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
