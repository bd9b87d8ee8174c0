//! `propsao`: data generation, surrogate training and GA/SAO optimization runs.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use propsao::hydro::Requirement;

use crate::failure::Failure;

#[derive(Parser)]
#[command(
    name = "propsao",
    version,
    about = "Propeller design by surrogate-seeded genetic search"
)]
struct Cli {
    /// TOML file with [solver], [space] and [ga] sections.
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(short, long, global = true)]
    jobs: Option<usize>,

    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true, value_name = "FILE")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample designs, evaluate them and write the kept records as CSV.
    GenData(GenDataArgs),
    /// Fit the forest on a train split and the tree on the full dataset.
    Train(TrainArgs),
    /// Optimize one requirement with GA or SAO.
    Optimize(OptimizeArgs),
    /// Run GA and SAO side by side on a set of requirements.
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Number of records to keep.
    #[arg(long)]
    pub count: usize,
    /// Minimum efficiency of a kept record.
    #[arg(long, default_value_t = propsao::dataset::DEFAULT_EFFICIENCY_FLOOR)]
    pub floor: f64,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overrides `space.rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset CSV.
    #[arg(short, long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = propsao::surrogate::DEFAULT_TREE_COUNT)]
    pub trees: usize,
    /// Held-out fraction used to score the forest.
    #[arg(long, default_value_t = 0.05)]
    pub test_frac: f64,
    /// Seed of the split and of the bootstrap draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_forest: PathBuf,
    #[arg(long)]
    pub out_tree: PathBuf,
    /// Evaluation report (default: `<out-forest>.report.json`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ga,
    Sao,
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    /// Forest model file.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    /// Tree model file.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Dataset the tree was trained on.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// `THRUST,SPEED,RPM` in N, m/s and rev/min.
    #[arg(long, value_parser = parse_requirement)]
    pub requirement: Requirement,
    /// Overrides `ga.eval_budget`.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Overrides `ga.rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub trace_out: PathBuf,
    /// JSON summary (default: trace path with a `.json` extension).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["requirements_file", "sample"])))]
pub struct CompareArgs {
    /// CSV with a `thrust,ship_speed,rpm` header.
    #[arg(long)]
    pub requirements_file: Option<PathBuf>,
    /// Sample this many requirements from the configured space instead.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Overrides `ga.eval_budget`.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Base seed the per-run seeds derive from (default: `ga.rng_seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn parse_requirement(text: &str) -> Result<Requirement, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [t, v, n] = parts[..] else {
        return Err(format!("expected THRUST,SPEED,RPM, got {text:?}"));
    };
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    Requirement::new(num(t)?, num(v)?, num(n)?).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::runtime(format!("worker pool: {e}")))?;
    }
    let ctx = commands::Context::new(cli.config, cli.manifest, cli.jobs)?;
    match cli.command {
        Command::GenData(args) => commands::gen_data(ctx, args),
        Command::Train(args) => commands::train(ctx, args),
        Command::Optimize(args) => commands::optimize(ctx, args),
        Command::Compare(args) => commands::compare(ctx, args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}
