//! `hetalloc` command-line harness: allocation tables, Monte Carlo latency
//! experiments and oracle checks driven by TOML experiment files.

mod commands;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetalloc::{validate_cluster, RuntimeModel};

use commands::Status;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "hetalloc",
    version,
    about = "Load allocation for coded computation on heterogeneous clusters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal per-group allocation and latency bound.
    Allocate(Common),
    /// Simulate every configured scheme, optionally over a sweep.
    Simulate(Common),
    /// Simulate the uniform scheme over a grid of code rates.
    SweepRate(Common),
    /// Run the brute-force oracles against the analytic optimum.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// CSV destination (default: the config's `output`, else stdout).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Simulator threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    PerTask,
    PerRow,
}

impl From<ModelArg> for RuntimeModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::PerTask => RuntimeModel::PerTask,
            ModelArg::PerRow => RuntimeModel::PerRow,
        }
    }
}

fn load(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        anyhow::ensure!(trials > 0, "--trials must be positive");
        cfg.trials = trials;
    }
    if let Some(model) = common.model {
        cfg.model = model.into();
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    for v in validate_cluster(&cfg.cluster()) {
        eprintln!("{v}");
    }
    Ok(cfg)
}

type CommandFn = fn(&ExperimentConfig, Box<dyn Write>) -> anyhow::Result<Status>;

fn run(cli: Cli) -> anyhow::Result<Status> {
    let (common, cmd): (&Common, CommandFn) = match &cli.command {
        Command::Allocate(c) => (c, commands::allocate),
        Command::Simulate(c) => (c, commands::simulate),
        Command::SweepRate(c) => (c, commands::sweep_rate),
        Command::Verify(c) => (c, commands::verify),
    };
    let cfg = load(common)?;
    let out: Box<dyn Write> = match &cfg.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    cmd(&cfg, out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::OracleFailure) => {
            eprintln!("error: one or more oracle checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
