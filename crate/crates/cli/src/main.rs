use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nslps::experiment::{parse_pairs, run_experiment, ExperimentConfig};
use nslps::Error;

/// Runs a convergence experiment and writes its CSV table.
///
/// Flags override the matching keys of the config file.
#[derive(Debug, Parser)]
#[command(name = "nslps", version)]
struct Args {
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// GD, GRADLPS, DIVLPS or HALFRATE
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    /// 1 (regular) or 2 (irregular)
    #[arg(long)]
    grid: Option<String>,
    /// `a-b` or a single level
    #[arg(long)]
    levels: Option<String>,
    /// comma separated viscosities
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    tend: Option<String>,
    /// CSV output path
    #[arg(long)]
    out: Option<String>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;

fn load(args: &Args) -> Result<ExperimentConfig, Error> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    let flags = [
        ("method", &args.method),
        ("degree", &args.degree),
        ("grid", &args.grid),
        ("levels", &args.levels),
        ("nu", &args.nu),
        ("dt", &args.dt),
        ("tend", &args.tend),
        ("output", &args.out),
    ];
    pairs.extend(flags.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))));
    ExperimentConfig::from_pairs(&pairs)
}

/// Bad settings and unwritable outputs are configuration errors; anything
/// raised while solving is a solver failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Usage(_) | Error::Io(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_experiment(&config) {
        Ok(outcome) => {
            println!("wrote {} rows to {}", outcome.rows.len(), config.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
