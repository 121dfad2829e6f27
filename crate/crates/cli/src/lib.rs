//! Command-line driver: reads a JSON experiment config, runs one command and
//! writes `<command>.json` (summary) and `<command>.csv` (detail rows).

pub mod commands;
pub mod config;
pub mod error;
pub mod input;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use serde_json::json;

pub use config::Command;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "gpwlab", version, about = "Rate, exponent and random-coding experiments for cq wiretap channels with side information")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "GPWLAB_THREADS")]
    pub threads: Option<usize>,
    /// Output directory; defaults to the config's `out`, then the working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Outputs {
    pub json: PathBuf,
    pub csv: PathBuf,
}

pub fn run(args: &Args) -> CliResult<Outputs> {
    let cfg = config::load_config(&args.config)?;
    let seed = args.seed.or(cfg.config.seed).unwrap_or(0);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::schema("--threads must be positive"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Output(e.to_string()))?;
    let report = pool.install(|| commands::execute(args.command, &cfg, seed))?;

    let summary = json!({
        "schema": output::SCHEMA_VERSION,
        "command": args.command.name(),
        "seed": seed,
        "config": cfg.raw,
        "result": report.result,
    });
    output::validate_summary(&summary).map_err(CliError::Output)?;

    let dir = args.out.clone().or_else(|| cfg.config.out.as_ref().map(|o| cfg.base.join(o))).unwrap_or_default();
    let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
    if !dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&dir).map_err(io)?;
    }
    let out = Outputs { json: dir.join(format!("{}.json", args.command.name())), csv: dir.join(format!("{}.csv", args.command.name())) };
    std::fs::write(&out.json, output::to_json_string(&summary)).map_err(io)?;
    std::fs::write(&out.csv, report.table.to_csv()?).map_err(io)?;
    Ok(out)
}

/// Parses `argv`, runs, reports errors on stderr; returns the exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&args) {
        Ok(out) => {
            println!("{}", out.json.display());
            println!("{}", out.csv.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
