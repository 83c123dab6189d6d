//! `boxctrl`: config-driven runs of the moving-wall simulator.
//!
//! Exit codes: 0 success, 1 invalid input, 2 budget exhausted / no improvement /
//! bound violation, 3 unsupported motion.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use boxctrl::Execution;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "boxctrl",
    version,
    about = "Moving-wall quantum box: transfer synthesis, resonance and stability studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Overrides the scenario's RNG seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads; falls back to BOXCTRL_THREADS, then to all cores.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a wall motion between two box eigenstates.
    Transfer,
    /// Integer resonance search, tracked spectrum and chain certificate.
    Resonance,
    /// Lifting convergence, stability constants and the segment-wise bound.
    Stability,
    /// Matrix dumps of the assembled operators.
    Operators {
        #[command(subcommand)]
        action: OperatorsAction,
    },
}

#[derive(Debug, Subcommand)]
enum OperatorsAction {
    /// Write every entry of the Laplacian, p, x∘p and V to operators.csv.
    Dump,
}

/// A failed run: message for stderr and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<boxctrl::Error> for Failure {
    fn from(e: boxctrl::Error) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

/// Settings shared by every command.
pub struct Context {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub execution: Execution,
}

impl Context {
    pub fn config_path(&self) -> Result<&PathBuf, Failure> {
        self.config
            .as_ref()
            .ok_or_else(|| Failure::invalid("this command needs --config PATH"))
    }
}

/// First line of every CSV: tool version, config hash and, if used, the seed.
pub fn stamp(sha256: &str, seed: Option<u64>) -> String {
    let mut s = format!(
        "boxctrl {} config-sha256={sha256}",
        env!("CARGO_PKG_VERSION")
    );
    if let Some(seed) = seed {
        s.push_str(&format!(" seed={seed}"));
    }
    s
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let k = match flag {
        Some(k) => Some(k),
        None => match std::env::var("BOXCTRL_THREADS") {
            Ok(v) if !v.trim().is_empty() => Some(v.trim().parse::<usize>().map_err(|_| {
                Failure::invalid(format!(
                    "BOXCTRL_THREADS must be a positive integer, got \"{v}\""
                ))
            })?),
            _ => None,
        },
    };
    if k == Some(0) {
        return Err(Failure::invalid("thread count must be positive"));
    }
    Ok(k)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = thread_count(cli.threads)?;
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::invalid(format!("cannot start {k} threads: {e}")))?;
    }
    let ctx = Context {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        execution: if threads == Some(1) {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    match cli.command {
        Command::Transfer => commands::transfer::run(&ctx),
        Command::Resonance => commands::resonance::run(&ctx),
        Command::Stability => commands::stability::run(&ctx),
        Command::Operators {
            action: OperatorsAction::Dump,
        } => commands::operators::dump(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
