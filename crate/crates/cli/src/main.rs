//! `rmdp`: solve, verify and benchmark reductive MDPs from the command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 model not reductive,
//! 4 solver failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "rmdp", version, about = "Reductive MDP toolkit")]
struct Cli {
    /// Seed for every random component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a model and write values, policy and solver statistics as JSON.
    Solve(SolveArgs),
    /// Check the drift condition and write the verdict as JSON.
    Verify(ModelArgs),
    /// Time solvers on liquidation instances of increasing size.
    Bench(BenchArgs),
    /// Mean inventory paths of liquidation policies.
    Simulate(SimulateArgs),
    /// Optimal liquidation action for every (inventory, price) state.
    PolicyGrid(PolicyGridArgs),
    /// Monte Carlo run of the shrinking-intervals process.
    Shrink(ShrinkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainKind {
    Liquidation,
    Spiral,
    Fig2a,
    Fig2b,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Rvi,
    Qvi,
    QviRandom,
    QviReversed,
    Bvi,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Rvi => "rvi",
            SolverKind::Qvi => "qvi",
            SolverKind::QviRandom => "qvi-random",
            SolverKind::QviReversed => "qvi-reversed",
            SolverKind::Bvi => "bvi",
        }
    }
}

/// Liquidation parameters shared by several commands; unset flags fall back
/// to the configuration file and then to the default instance.
#[derive(Debug, Clone, Default, Args)]
pub struct MarketArgs {
    #[arg(long)]
    z_min: Option<i64>,
    #[arg(long)]
    z_max: Option<i64>,
    #[arg(long)]
    z0: Option<i64>,
    #[arg(long)]
    p_down: Option<f64>,
    #[arg(long)]
    p_stay: Option<f64>,
    #[arg(long)]
    p_up: Option<f64>,
    #[arg(long)]
    w0: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long)]
    discount: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Built-in model.
    #[arg(long, value_enum, required_unless_present = "model", conflicts_with = "model")]
    domain: Option<DomainKind>,
    /// Model file (JSON).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    q_max: Option<u32>,
    #[arg(long)]
    w1: Option<f64>,
    #[command(flatten)]
    market: MarketArgs,
    /// Reward per move of the spiral walk.
    #[arg(long)]
    step_reward: Option<f64>,
    /// Spiral action grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    mix_levels: Option<Vec<f64>>,
    /// Self-loop probability of the small chain fixtures.
    #[arg(long)]
    loop_prob: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct SolverArgs {
    /// Stopping threshold of the iterative solvers.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_sweeps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "rvi")]
    solver: SolverKind,
    #[command(flatten)]
    tuning: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Inventory sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10u32, 20, 40, 80, 100])]
    q_max: Vec<u32>,
    #[arg(long)]
    w1: Option<f64>,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_values_t = [SolverKind::Rvi, SolverKind::QviRandom, SolverKind::QviReversed, SolverKind::Bvi]
    )]
    solvers: Vec<SolverKind>,
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    tuning: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Optimal,
    SellAll,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    q_max: Option<u32>,
    /// Transaction cost weights, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.4])]
    w1: Vec<f64>,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, value_enum, default_value = "rvi")]
    solver: SolverKind,
    #[arg(long, value_enum, default_value = "optimal")]
    policy: PolicyKind,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[command(flatten)]
    tuning: SolverArgs,
}

#[derive(Debug, Args)]
pub struct PolicyGridArgs {
    #[arg(long)]
    q_max: Option<u32>,
    #[arg(long)]
    w1: Option<f64>,
    #[command(flatten)]
    market: MarketArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShrinkKind {
    Multiplicative,
    Delta,
}

#[derive(Debug, Args)]
pub struct ShrinkArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ShrinkKind>,
    /// Interval shrinkage for `--mode delta`.
    #[arg(long)]
    delta: Option<f64>,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, error: error.into() }
    }

    pub fn not_reductive(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 3, error: error.into() }
    }

    pub fn solver(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: 4, error: error.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::input)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Solve(args) => commands::solve(&args, &config, seed, out),
        Command::Verify(args) => commands::verify(&args, &config, out),
        Command::Bench(args) => commands::bench(&args, &config, seed, out),
        Command::Simulate(args) => commands::simulate(&args, &config, seed, out),
        Command::PolicyGrid(args) => commands::policy_grid(&args, &config, out),
        Command::Shrink(args) => commands::shrink(&args, &config, cli.seed, out),
    }
}
