use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tailwave::config::Config;
use tailwave::pipeline::{self, write_json};
use tailwave::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tailwave",
    version,
    about = "Late-time tails of radial u_tt - Δu = u^p"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted tail coefficients from the moments of h.
    Predict(Common),
    /// Nonlinear run plus free companion; observer CSVs and run.json.
    Evolve(Common),
    /// Fits on a run directory written by `evolve`.
    Analyze(Common),
    /// Runs eps and 2 eps and checks measured against predicted values.
    Verify(Common),
    /// One run per epsilon in the config list, in parallel.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Multiplies the grid size N.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    resolution_factor: u32,
}

#[derive(Serialize)]
struct Failure {
    exit_code: i32,
    error: String,
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("TAILWAVE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "TAILWAVE_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })
}

/// Returns whether every check passed (always true outside `verify`).
fn run(command: &Command) -> Result<bool> {
    let (Command::Predict(c)
    | Command::Evolve(c)
    | Command::Analyze(c)
    | Command::Verify(c)
    | Command::Sweep(c)) = command;
    let config = Config::load(&c.config)?;
    let factor = c.resolution_factor as usize;
    ensure_dir(&c.out)?;
    match command {
        Command::Predict(_) => {
            let eps = config.epsilon.values();
            let path = c.out.join("prediction.json");
            if eps.len() == 1 {
                write_json(&path, &pipeline::predict(&config, eps[0])?)?;
            } else {
                let all = eps
                    .iter()
                    .map(|e| pipeline::predict(&config, *e))
                    .collect::<Result<Vec<_>>>()?;
                write_json(&path, &all)?;
            }
        }
        Command::Evolve(_) => {
            let eps = config.epsilon.first();
            let primary = config.evolution(eps, factor)?;
            let pair = pipeline::run_pair(&primary)?;
            pipeline::write_pair(&c.out, &pair)?;
            if factor > 1 {
                let coarse = tailwave::solver::EvolutionConfig {
                    nonlinear: false,
                    ..config.evolution(eps, 1)?
                };
                let coarse = tailwave::solver::evolve(&coarse)?;
                let conv = pipeline::convergence(&coarse, &pair.linear)?;
                write_json(&c.out.join("convergence.json"), &conv)?;
            }
        }
        Command::Analyze(_) => {
            let pair = pipeline::read_pair(&c.out)?;
            let prediction = pipeline::predict(&config, pair.nonlinear.config.epsilon)?;
            let report = pipeline::analyze(&config, &pair, &prediction)?;
            write_json(&c.out.join("analysis.json"), &report)?;
        }
        Command::Verify(_) => {
            let report = pipeline::verify(&config, factor)?;
            let table = pipeline::render_table(&report);
            write_json(&c.out.join("verify.json"), &report)?;
            std::fs::write(c.out.join("verify.txt"), &table).map_err(|e| Error::Io {
                path: c.out.join("verify.txt"),
                source: e,
            })?;
            print!("{table}");
            return Ok(report.all_pass);
        }
        Command::Sweep(_) => {
            let report = pipeline::sweep(&config, factor, &c.out)?;
            write_json(&c.out.join("sweep.json"), &report)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| run(&cli.command));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let code = e.exit_code();
            eprintln!("tailwave: {e}");
            let (Command::Predict(c)
            | Command::Evolve(c)
            | Command::Analyze(c)
            | Command::Verify(c)
            | Command::Sweep(c)) = &cli.command;
            if c.out.is_dir() {
                let failure = Failure {
                    exit_code: code,
                    error: e.to_string(),
                };
                let _ = write_json(&c.out.join("error.json"), &failure);
            }
            ExitCode::from(code as u8)
        }
    }
}
