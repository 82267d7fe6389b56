//! `chaoskit check|verify|sde|simulate --config FILE`.
//!
//! Exit status 0 when every verdict passes, 1 when one fails, 2 on a
//! configuration or runtime error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Assumption checkers on the configured kernel family.
    Check,
    /// Selected non-degeneracy suites.
    Verify,
    /// Malliavin matrix and density diagnostics for a driven SDE.
    Sde,
    /// Sample paths of X and DX as CSV.
    Simulate,
}

#[derive(Debug, Parser)]
#[command(name = "chaoskit", version, about = "Experiments with processes in a fixed Wiener chaos")]
struct Cli {
    command: Command,
    /// Experiment file with `key = value` lines under `[section]` headers.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding `[run] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

fn run(cli: &Cli) -> Result<bool, String> {
    let mut cfg = config::ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.svg |= cli.svg;
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err("--threads must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let mut out = output::OutDir::create(&cfg.out)?;
    let pass = match cli.command {
        Command::Check => commands::check(&cfg, &mut out)?,
        Command::Verify => commands::verify(&cfg, &mut out)?,
        Command::Sde => commands::sde(&cfg, &mut out)?,
        Command::Simulate => commands::simulate(&cfg, &mut out)?,
    };
    println!("wrote {} file(s) to {}", out.written().len(), cfg.out.display());
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprintln!("error: {}", e.to_string().lines().next().unwrap_or("bad arguments").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
