use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use silab_cli::{run, CliError, CommandKind, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    VerifyOperators,
    VerifyBounds,
    Diagnostics,
    Train,
    Sweep,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::VerifyOperators => CommandKind::VerifyOperators,
            Command::VerifyBounds => CommandKind::VerifyBounds,
            Command::Diagnostics => CommandKind::Diagnostics,
            Command::Train => CommandKind::Train,
            Command::Sweep => CommandKind::Sweep,
        }
    }
}

/// Verification suites, diagnostics and tabular agents for n-step
/// lower-bound Q-learning.
#[derive(Debug, Parser)]
#[command(name = "silab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every derived RNG stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override one config field, e.g. `--set bounds.batch.count=10`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
    /// Replace a grid with a comma-separated list, e.g. `--grid bounds.ns=1,2,5`.
    #[arg(long = "grid", value_name = "PATH=V1,V2,...")]
    grids: Vec<String>,
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg = cfg.with_overrides(&cli.sets, &cli.grids)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let outcome = run(cli.command.into(), &cfg)?;
    print!("{}", outcome.summary);
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
