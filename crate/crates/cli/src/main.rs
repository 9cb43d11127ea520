//! `mcocycle`: run markov-cocycle experiments from JSON configurations.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence, 4 I/O failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use markov_cocycle::harness::{self, load_config, write_atomic, ExperimentConfig};
use markov_cocycle::Error;

#[derive(Debug, Parser)]
#[command(
    name = "mcocycle",
    version,
    about = "Lyapunov exponents, stationary vectors and coupling energies of GL(2) cocycles over Markov shifts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a configuration and print it with defaults filled in.
    Validate(Common),
    /// Monte-Carlo exponents, determinant identity and Furstenberg maximum (JSON).
    Lyapunov(Common),
    /// Stationary measure vector with the largest Furstenberg integral (CSV).
    Stationary(Common),
    /// Invariant points and their expansion certificates (JSON).
    Expanding(Common),
    /// Continuity sweep over a perturbation family (CSV).
    Sweep(Common),
    /// Energy-contraction trace of couplings near an expanding point (CSV).
    EnergyDecay(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Path to the JSON configuration.
    config: PathBuf,
    /// Output path; overrides the configuration. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    threads: Option<usize>,
    /// Grid size; overrides the configuration.
    #[arg(long)]
    grid: Option<usize>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let cfg = load_config(&common.config)?;
    match common.grid {
        Some(n) => cfg.with_grid(n),
        None => Ok(cfg),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (Command::Validate(common)
    | Command::Lyapunov(common)
    | Command::Stationary(common)
    | Command::Expanding(common)
    | Command::Sweep(common)
    | Command::EnergyDecay(common)) = &cli.command;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    }
    let cfg = load(common)?;
    let configured = |path: &Option<String>| common.out.clone().or_else(|| path.as_ref().map(PathBuf::from));
    match &cli.command {
        Command::Validate(_) => emit(common.out.as_deref(), &cfg.to_json()),
        Command::Lyapunov(_) => {
            let report = harness::run_lyapunov(&cfg)?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            emit(configured(&cfg.output.lyapunov).as_deref(), &report.to_json())
        }
        Command::Stationary(_) => {
            let (report, csv) = harness::run_stationary(&cfg)?;
            eprintln!(
                "stationary vector from init {} (residual {:e}), Furstenberg integral {}, {} atom(s)",
                report.furstenberg.init,
                report.furstenberg.residual,
                report.furstenberg.value,
                report.atoms.len()
            );
            emit(configured(&cfg.output.stationary).as_deref(), &csv.render())
        }
        Command::Expanding(_) => {
            let report = harness::run_expanding(&cfg)?;
            emit(configured(&cfg.output.expanding).as_deref(), &report.to_json())
        }
        Command::Sweep(_) => {
            let out = harness::run_sweep(&cfg)?;
            emit(configured(&cfg.output.sweep).as_deref(), &out.csv.render())
        }
        Command::EnergyDecay(_) => {
            let out = harness::run_energy_decay(&cfg)?;
            let path = configured(&cfg.output.energy_decay);
            emit(path.as_deref(), &out.csv.render())?;
            match &path {
                Some(p) => {
                    write_atomic(sidecar(p), out.summary.to_json().as_bytes())?;
                    println!("{}", out.summary.line());
                }
                None => eprintln!("{}", out.summary.line()),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
