use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use subgraph_stein_cli::{run, Command, LoadedConfig, RunOptions};

#[derive(Parser)]
#[command(name = "sgstein", version, about = "Normal approximation experiments for subgraph counts in G(n, p)")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// experiment configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// worker threads; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// largest number of edge configurations the exact oracle may enumerate
    #[arg(long, global = true)]
    budget_configs: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// subgraph classes, Ψ, copy counts and moments
    Catalog,
    /// triple and six-chain sums over the copy index
    Chains,
    /// exact checks of the decomposition on small n
    OracleVerify,
    /// bound terms per n
    Bounds,
    /// Monte Carlo Kolmogorov distances
    McRun,
    /// mc-run followed by log-log rate fits
    RateFit,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Catalog => Command::Catalog,
            Sub::Chains => Command::Chains,
            Sub::OracleVerify => Command::OracleVerify,
            Sub::Bounds => Command::Bounds,
            Sub::McRun => Command::McRun,
            Sub::RateFit => Command::RateFit,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let opts = RunOptions {
        out_dir: cli.out,
        seed: cli.seed,
        budget_configs: cli.budget_configs,
    };
    let result = LoadedConfig::from_path(&path).and_then(|cfg| run(cfg, cli.command.into(), &opts));
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
