use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use multistage_cli::{execute, load_table, Command, Overrides};

/// Experiments on multi-stage strategic classification.
#[derive(Debug, Parser)]
#[command(name = "multistage", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory (overrides `run.output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `section.key=v1,v2,...`; one run per value in `<out>/<key>=<value>/`.
    #[arg(long)]
    sweep: Option<String>,
}

fn configure_threads() {
    if let Some(n) = std::env::var("MULTISTAGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        horizon: cli.horizon,
        out: cli.out,
        sweep: cli.sweep,
    };
    match load_table(&cli.config).and_then(|t| execute(cli.command, t, &overrides)) {
        Ok(out) => {
            println!("{}: wrote {}", cli.command.name(), out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
