//! `modcma`: run, benchmark, tune, verify and report on modular CMA-ES configurations.

mod commands;
mod exit;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ReportArgs, ReportKind, RunArgs, SingleModuleArgs, VerifyArgs};
use exit::CliError;

#[derive(Parser)]
#[command(name = "modcma", version, about = "Modular CMA-ES laboratory")]
struct Cli {
    /// Worker threads for independent runs (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one benchmark instance and write its trace.
    Run {
        #[arg(long)]
        function: String,
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        iid: u64,
        /// Configuration JSON, or `@file`.
        #[arg(long, default_value = "{}")]
        config: String,
        #[arg(long)]
        budget: u64,
        #[arg(long, env = "MODCMA_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the default and every single-module deviation on the suite.
    SingleModule {
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long)]
        budget: u64,
        #[arg(long, default_value_t = 25)]
        runs: u64,
        /// Restrict to these functions (comma separated).
        #[arg(long, value_delimiter = ',')]
        functions: Vec<String>,
        /// Include the new step-size options.
        #[arg(long)]
        new_ssa: bool,
        /// Include the new boundary corrections.
        #[arg(long)]
        new_bounds: bool,
        #[arg(long, env = "MODCMA_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the iterated-racing tuner described by a manifest.
    Tune {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Re-run elites on a fixed seed list.
    Verify {
        #[arg(long)]
        elites: PathBuf,
        #[arg(long)]
        function: String,
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        iid: u64,
        /// Evaluations per run; 10 000·dim when absent.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 25)]
        runs: usize,
        #[arg(long, default_value_t = 1_000_000)]
        seed_base: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn stored elites, logs and traces into report tables.
    Report {
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// Elite files, optionally as `label=path`.
        #[arg(long)]
        elites: Vec<String>,
        #[arg(long)]
        baseline: Vec<String>,
        #[arg(long)]
        extension: Vec<String>,
        #[arg(long)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        runlog: Option<PathBuf>,
        #[arg(long)]
        budget: Option<u64>,
        /// Label for inputs given without one.
        #[arg(long, default_value = "all")]
        label: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Run { function, dim, iid, config, budget, seed, out } => {
            commands::cmd_run(&RunArgs { function, dim, iid, config, budget, seed, out })
        }
        Command::SingleModule { dim, budget, runs, functions, new_ssa, new_bounds, seed, out } => {
            commands::cmd_single_module(&SingleModuleArgs { dim, budget, runs, functions, new_ssa, new_bounds, seed, out })
        }
        Command::Tune { manifest } => {
            let seed = match std::env::var("MODCMA_SEED") {
                Ok(s) => Some(s.parse().map_err(|_| CliError::invalid(format!("MODCMA_SEED={s} is not an integer")))?),
                Err(_) => None,
            };
            commands::cmd_tune(&manifest, seed)
        }
        Command::Verify { elites, function, dim, iid, budget, runs, seed_base, out } => {
            commands::cmd_verify(&VerifyArgs { elites, function, dim, iid, budget, runs, seed_base, out })
        }
        Command::Report { kind, elites, baseline, extension, traces, runlog, budget, label, out } => {
            commands::cmd_report(&ReportArgs { kind, elites, baseline, extension, traces, runlog, budget, label, out })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
