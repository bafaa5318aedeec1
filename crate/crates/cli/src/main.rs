use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Job-shop scheduling with learned machine-permutation quality.
#[derive(Debug, Parser)]
#[command(name = "jspq", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Base seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for labeling and benchmarks (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    /// Directory for every file a command writes.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write random instances in the standard text format.
    Generate {
        #[arg(long)]
        jobs: usize,
        #[arg(long)]
        machines: usize,
        #[arg(long, default_value_t = 1)]
        p_min: u32,
        #[arg(long, default_value_t = 99)]
        p_max: u32,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Solve an instance to optimality and print the status and makespan.
    Solve {
        instance: PathBuf,
        /// Branch and bound (the default).
        #[arg(long, conflicts_with = "brute")]
        exact: bool,
        /// Enumerate every combination of machine permutations.
        #[arg(long)]
        brute: bool,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
    },
    /// Label machine permutations of the given instances into a dataset.
    Label {
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        /// Random permutations per machine.
        #[arg(long, default_value_t = 128)]
        random: usize,
        /// Seconds allowed for each exact solve.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long, default_value = "dataset.jsonl")]
        name: String,
    },
    /// Dump the per-operation feature table of an instance.
    Features {
        instance: PathBuf,
        /// Leave machine arcs out of the feature graph.
        #[arg(long)]
        omit_machine_arcs: bool,
    },
    /// Train the oracle on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Total epochs; the four-phase schedule is rescaled when not 100.
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 128)]
        batch_size: usize,
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        #[arg(long, default_value_t = 0.3)]
        dropout: f64,
        /// Disable gradient-norm clipping.
        #[arg(long)]
        no_clip: bool,
    },
    /// Report WTA and the binary classification table for trained weights.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long = "tol", default_values_t = [0.05, 0.07])]
        tols: Vec<f64>,
        #[arg(long = "threshold", default_values_t = [0.5, 0.6, 0.7, 0.8, 0.9])]
        thresholds: Vec<f64>,
        /// Which part of the split to score.
        #[arg(long, value_enum, default_value_t = Part::All)]
        part: Part,
    },
    /// Run a tabu search on one or more instances.
    Search {
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Algo::Sts)]
        algo: Algo,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 10)]
        tenure: usize,
        /// Oracle weights, required by `--algo ots`.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Known optimum, for the gap.
        #[arg(long)]
        reference: Option<u32>,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Keep a move only if the oracle scores it strictly higher.
        #[arg(long)]
        strict: bool,
        /// Print full reports as JSON lines.
        #[arg(long)]
        json: bool,
    },
    /// Run a benchmark described by a JSON spec file.
    Bench { spec: PathBuf },
    /// Generate, label, train, evaluate and benchmark in one go.
    Pipeline {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 6)]
        jobs: usize,
        #[arg(long, default_value_t = 6)]
        machines: usize,
        #[arg(long, default_value_t = 32)]
        random: usize,
        #[arg(long, default_value_t = 25)]
        epochs: usize,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
    },
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Instance files; defaults to the paths in the dataset manifest.
    #[arg(long = "instance")]
    instances: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Part {
    All,
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Sts,
    Ots,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.global.log_level).format_timestamp(None).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
