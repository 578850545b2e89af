use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geim_cli::experiments::execute;
use geim_cli::{CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "geim", version, about = "Greedy interpolation experiments on a two-domain Laplace problem")]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Largest number of interpolation terms.
    #[arg(long = "M-max", global = true)]
    m_max: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve the parameter grid and write the versioned snapshot directory.
    Snapshots,
    /// Worst training interpolation error against M.
    Decay,
    /// Singular values of the snapshot set in L2 and H1.
    Svd,
    /// Interpolation error against the SVD best fit.
    Bestfit,
    /// Empirical, exact and pessimistic Lebesgue constants.
    Lebesgue,
    /// Coupled reconstruction errors on both subdomains.
    Coupled,
    /// Noise variance of single and averaged reconstructions.
    Noise,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Command {
        match c {
            Cmd::Snapshots => Command::Snapshots,
            Cmd::Decay => Command::Decay,
            Cmd::Svd => Command::Svd,
            Cmd::Bestfit => Command::Bestfit,
            Cmd::Lebesgue => Command::Lebesgue,
            Cmd::Coupled => Command::Coupled,
            Cmd::Noise => Command::Noise,
        }
    }
}

fn resolve(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    }
    if let Some(m) = args.m_max {
        cfg.m_max = m;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = Command::from(args.command);
    match resolve(&args).and_then(|cfg| execute(command, &cfg)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record(Some(command)));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
