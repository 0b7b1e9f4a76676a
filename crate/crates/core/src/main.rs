use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oblivq::scenario::{exit_code, parse_scenario, run_scenario, validate_scenario, RunOptions, Scenario};

#[derive(Parser)]
#[command(name = "oblivq", version, about = "Validate and run oblivious quantum protocol scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every violation.
    Validate { file: PathBuf },
    /// Run a scenario and write records, summary and the resolved scenario.
    Run {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        validate_only: bool,
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

fn load(path: &Path) -> Result<Scenario, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        6
    })?;
    parse_scenario(&text).map_err(|v| {
        eprintln!("{v}");
        exit_code(std::slice::from_ref(&v)) as u8
    })
}

fn check(s: &Scenario) -> Result<(), u8> {
    let violations = validate_scenario(s);
    if violations.is_empty() {
        return Ok(());
    }
    for v in &violations {
        eprintln!("{v}");
    }
    Err(exit_code(&violations) as u8)
}

fn real_main() -> Result<(), u8> {
    match Cli::parse().command {
        Command::Validate { file } => {
            let s = load(&file)?;
            check(&s)?;
            println!("{}: valid", file.display());
        }
        Command::Run { file, seed, shots, out, validate_only, tolerance } => {
            let s = load(&file)?;
            let opts = RunOptions { seed, shots, out, tolerance };
            if validate_only {
                check(&oblivq::scenario::resolve(&s, &opts))?;
                println!("{}: valid", file.display());
                return Ok(());
            }
            let artifacts = run_scenario(&s, &opts).map_err(|e| {
                eprint!("{e}");
                if !e.to_string().ends_with('\n') {
                    eprintln!();
                }
                e.exit_code() as u8
            })?;
            for (k, v) in &artifacts.summary_rows {
                println!("{k}: {v}");
            }
            println!("records: {}", artifacts.records.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
