//! `measdep`: batch front end for the measurement-dependence toolkit.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 internal invariant breach.

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "measdep",
    version,
    about = "Measurement dependence, Bell/KCBS inequalities and teleportation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate single-qubit teleportation.
    Teleport(TeleportArgs),
    /// Evaluate the CHSH value of a scenario, model or the best local strategy.
    Chsh(ChshArgs),
    /// Mutual information of a joint table, or the dependence report of a model.
    Mi(MiArgs),
    /// Search for measurement-dependent models.
    Optimize(OptimizeArgs),
    /// Evaluate the KCBS sum.
    Kcbs(KcbsArgs),
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("input").required(true).args(["a_re", "random"])))]
pub struct TeleportArgs {
    /// Real part of the |0⟩ amplitude.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "random")]
    pub a_re: Option<f64>,
    #[arg(
        long,
        default_value_t = 0.0,
        allow_hyphen_values = true,
        conflicts_with = "random"
    )]
    pub a_im: f64,
    /// Real part of the |1⟩ amplitude.
    #[arg(
        long,
        default_value_t = 0.0,
        allow_hyphen_values = true,
        conflicts_with = "random"
    )]
    pub b_re: f64,
    #[arg(
        long,
        default_value_t = 0.0,
        allow_hyphen_values = true,
        conflicts_with = "random"
    )]
    pub b_im: f64,
    /// Draw a fresh Haar-random input for every trial.
    #[arg(long)]
    pub random: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Fix the Bell-measurement outcome (0..=3) instead of sampling it.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..4))]
    pub force_outcome: Option<u8>,
    /// Transcript file; the summary goes next to it as `<out>.summary.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "model", "deterministic_max"])))]
pub struct ChshArgs {
    /// Quantum scenario JSON.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Hidden-variable model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Best of the 16 deterministic local strategies.
    #[arg(long)]
    pub deterministic_max: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["table", "model"])))]
pub struct MiArgs {
    /// Comma-separated joint probabilities, row-major.
    #[arg(long, allow_hyphen_values = true)]
    pub table: Option<String>,
    /// Number of columns of `--table`.
    #[arg(long, default_value_t = 2, requires = "table", value_parser = clap::value_parser!(u64).range(1..))]
    pub cols: u64,
    /// Hidden-variable model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("mode").required(true).args(["target_s", "budget", "curve"])))]
pub struct OptimizeArgs {
    /// Smallest dependence reaching this CHSH value.
    #[arg(long, allow_hyphen_values = true)]
    pub target_s: Option<f64>,
    /// Largest CHSH value within this many bits of dependence.
    #[arg(long, allow_hyphen_values = true)]
    pub budget: Option<f64>,
    /// Comma-separated ascending budgets in bits.
    #[arg(long, allow_hyphen_values = true)]
    pub curve: Option<String>,
    /// Flat key = value search configuration.
    #[arg(long, env = "MEASDEP_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["classical_min", "quantum_optimal", "scenario"])))]
pub struct KcbsArgs {
    /// Minimum over noncontextual ±1 assignments.
    #[arg(long)]
    pub classical_min: bool,
    /// Pentagram vectors with the state along the symmetry axis.
    #[arg(long)]
    pub quantum_optimal: bool,
    /// KCBS scenario JSON.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Internal(String),
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "{m}"),
            Failure::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<measdep::Error> for Failure {
    fn from(e: measdep::Error) -> Self {
        if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Teleport(a) => commands::teleport(a),
        Command::Chsh(a) => commands::chsh(a),
        Command::Mi(a) => commands::mi(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Kcbs(a) => commands::kcbs(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
