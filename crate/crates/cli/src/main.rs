//! `truncem` — experiment runner for the truncated Euler–Maruyama library.
//!
//! Loads one flat config file, runs the configured experiment (simulate,
//! moments, converge or price) and writes CSV artifacts plus a manifest and
//! a JSON summary into the output directory. Exit codes: 0 success, 1 I/O,
//! 2 config parse, 3 validation, 4 simulation. Failures print a single-line
//! JSON error record to stderr and write nothing.

mod config;
mod run;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use config::CliError;

#[derive(Parser)]
#[command(
    name = "truncem",
    version,
    about = "Truncated Euler-Maruyama experiments: sample paths, moments, \
             strong-convergence studies and barrier-option prices"
)]
struct Cli {
    /// Experiment config file (flat `key = value` lines).
    #[arg(long)]
    config: std::path::PathBuf,

    /// Worker threads; falls back to env TRUNCEM_WORKERS, then to the
    /// available parallelism. Never affects results, only wall time.
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory, overriding the config's `output_dir`.
    #[arg(long)]
    output: Option<String>,

    /// Seed override for the run.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": err.message(),
                    "kind": err.kind(),
                    "exit_code": err.exit_code(),
                })
            );
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn resolve_workers(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("TRUNCEM_WORKERS") {
        Ok(raw) => {
            let n = raw.trim().parse::<usize>().map_err(|_| {
                CliError::Config(format!("TRUNCEM_WORKERS must be an unsigned integer, got {raw:?}"))
            })?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn run_cli(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = resolve_workers(cli.workers)? {
        if n == 0 {
            return Err(CliError::Config("worker count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("worker pool: {e}")))?;
    }

    let text = std::fs::read_to_string(&cli.config).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", cli.config.display()))
    })?;
    let mut cfg = config::parse_config(&text)?;
    if let Some(dir) = cli.output {
        cfg.output_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    // All computation happens before the first write, so a failing run
    // leaves no partial artifacts.
    let artifacts = run::execute(&cfg)?;

    let dir = Path::new(&cfg.output_dir);
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    for (name, contents) in &artifacts {
        let path = dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
