use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use epvac_cli::{cmd_run, cmd_sweep, cmd_validate, Options};

#[derive(Parser)]
#[command(name = "epvac", version, about = "Euler-Poisson with physical vacuum: viscous approximation runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Sweep worker pool size (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    dry_run: bool,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config: 0 pass, 2 findings, 1 malformed.
    Validate,
    /// One run: 0 ok, 3 energy bound violated, 4 fixed point failed.
    Run,
    /// Kappa sweep and/or refinement ladder: 0 ok, 5 partial failure.
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    let opts = Options {
        config,
        out: cli.out,
        workers: cli
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        dry_run: cli.dry_run,
        seed: cli.seed,
    };
    let code = match cli.command {
        Command::Validate => cmd_validate(&opts),
        Command::Run => cmd_run(&opts),
        Command::Sweep => cmd_sweep(&opts),
    };
    ExitCode::from(code as u8)
}
