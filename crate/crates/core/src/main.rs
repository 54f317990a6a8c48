use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hetraffic::cli::{exit_code, run, ExperimentConfig, RunOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Simulate,
    Covariance,
    Scaling,
    LimitCheck,
    TelecomChf,
    RenewalLd,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Subcommand::Simulate,
            Command::Covariance => Subcommand::Covariance,
            Command::Scaling => Subcommand::Scaling,
            Command::LimitCheck => Subcommand::LimitCheck,
            Command::TelecomChf => Subcommand::TelecomChf,
            Command::RenewalLd => Subcommand::RenewalLd,
        }
    }
}

/// Heavy-tailed traffic aggregation experiments.
#[derive(Debug, Parser)]
#[command(name = "hetraffic", version)]
struct Args {
    /// Subcommand to run.
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, env = "HETRAFFIC_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: config value, else all cores).
    #[arg(long, env = "HETRAFFIC_WORKERS")]
    workers: Option<usize>,
    /// Output directory (default: config value, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when a verdict is inconclusive or differs from its prediction.
    #[arg(long)]
    assert: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        seed: args.seed,
        workers: args.workers,
        out: args.out,
        assert: args.assert,
    };
    let result = ExperimentConfig::load(&args.config).and_then(|cfg| run(args.command.into(), &cfg, &opts));
    match &result {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.assertion_failed {
                eprintln!("assertion failed: verdict differs from prediction");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
