mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::SampleArgs;
use crate::config::SampleMode;
use crate::error::CliError;

/// Build deep inverse Rosenblatt transports and sample with them.
#[derive(Parser)]
#[command(name = "dirt", version)]
struct Cli {
    /// Threads for density evaluation; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Log progress to stderr (same as RUST_LOG=info).
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a DIRT from a run config and save it.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// DIRT file to write; overrides outputs.dirt.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Build report JSON; overrides outputs.report. Defaults to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw debiased samples by independence MCMC or importance sampling.
    Sample {
        dirt: PathBuf,
        /// Target and sampler settings; without it the embedded target is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<SampleMode>,
        #[arg(short = 'N')]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Samples CSV; defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Diagnostics JSON; defaults to stderr.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Quadrature divergences against the target with their error bounds (d ≤ 3).
    Diagnose {
        dirt: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Gauss points per panel; the check repeats at twice this.
        #[arg(long, default_value_t = 12)]
        quad_order: usize,
        #[arg(long, default_value_t = 16)]
        panels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a JSON summary of a DIRT file.
    Info { dirt: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    match cli.command {
        Command::Build {
            config,
            out,
            report,
            seed,
        } => commands::build(&config, out, report, seed),
        Command::Sample {
            dirt,
            config,
            mode,
            n,
            seed,
            out,
            diagnostics,
        } => commands::sample(SampleArgs {
            dirt,
            config,
            mode,
            n,
            seed,
            out,
            diagnostics,
        }),
        Command::Diagnose {
            dirt,
            config,
            quad_order,
            panels,
            out,
        } => commands::diagnose(&dirt, config.as_deref(), quad_order, panels, out.as_deref()),
        Command::Info { dirt } => commands::info(&dirt),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
