//! `restartk run <config.json>`: runs one experiment described by a JSON
//! config and writes its report.
//!
//! The seed in force is `RESTARTK_SEED` when that variable is set and the
//! config's `seed` otherwise. Relative output paths are resolved against
//! `--out` when given and against the working directory otherwise; a chain
//! file named by the config is resolved against the config's directory.
//!
//! Exit codes: 0 success, 1 unreadable input or unwritable output,
//! 2 validation error, 3 numerical failure, 4 property-check failure.
//! Reports are written only once the task has finished; on a property
//! failure the report is still written so the violation can be inspected.

mod config;
mod error;
mod report;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{effective_seed, ExperimentConfig, SEED_ENV};
use error::{CliError, EXIT_OK, EXIT_PROPERTY};

#[derive(Debug, Parser)]
#[command(name = "restartk", version, about = "Experiments on Markov processes with Poissonian restarts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Maximum number of worker threads; results do not depend on it.
        #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
        threads: Option<u16>,
        /// Directory against which relative output paths are resolved.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Progress and provenance on standard error.
        #[arg(long)]
        verbose: bool,
    },
}

struct RunArgs {
    config: PathBuf,
    threads: Option<usize>,
    out: Option<PathBuf>,
    verbose: bool,
}

fn resolve(out: Option<&Path>, p: &Path) -> PathBuf {
    match out {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// Returns the exit status of a completed run; errors carry their own.
fn run(args: &RunArgs) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Read {
        path: args.config.clone(),
        source,
    })?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let env_seed = std::env::var(SEED_ENV).ok();
    let seed = effective_seed(cfg.seed, env_seed.as_deref())?;
    let base_dir = args.config.parent().unwrap_or(Path::new("."));
    if args.verbose {
        let source = if env_seed.is_some() { SEED_ENV } else { "config" };
        eprintln!("task {} with seed {seed} from {source}", cfg.task.name());
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config {
        field: "--threads".into(),
        reason: e.to_string(),
    })?;
    if args.verbose {
        eprintln!("using {} worker threads", pool.current_num_threads());
    }
    let outcome = pool.install(|| tasks::execute(&cfg, seed, base_dir))?;

    let report_path = resolve(args.out.as_deref(), &cfg.output.path);
    let bytes = report::render(cfg.output.format, &outcome.table, &outcome.json);
    report::write_atomic(&report_path, &bytes)?;
    if args.verbose {
        eprintln!("wrote {}", report_path.display());
    }
    if let (Some(p), Some(log)) = (&cfg.output.path_log, &outcome.path_log) {
        let p = resolve(args.out.as_deref(), p);
        report::write_atomic(&p, log)?;
        if args.verbose {
            eprintln!("wrote {}", p.display());
        }
    }
    match outcome.violation {
        Some(msg) => {
            eprintln!("restartk: property check failed: {msg}");
            Ok(EXIT_PROPERTY)
        }
        None => Ok(EXIT_OK),
    }
}

fn main() -> ExitCode {
    let Command::Run {
        config,
        threads,
        out,
        verbose,
    } = Cli::parse().command;
    let args = RunArgs {
        config,
        threads: threads.map(usize::from),
        out,
        verbose,
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("restartk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
