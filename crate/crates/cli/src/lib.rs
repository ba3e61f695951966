//! Batch front end for the `cavfb` library.
//!
//! Every subcommand writes one or more CSV tables and a JSON sidecar next to
//! the `--out` path. The sidecar echoes the resolved configuration (it can be
//! passed back through `--config` to repeat the run), the library version and
//! the outcome of the invariant checks executed during the run.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{Evolution, ExperimentConfig, InputField};
pub use output::{Check, Checks, Outcome, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] cavfb::Error),
    #[error("{failed} invariant check(s) failed, see {sidecar}")]
    Invariant { failed: usize, sidecar: String },
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cavfb::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant { .. } => 3,
            CliError::Io(_) => 1,
            CliError::Library(e) => match e {
                E::Truncation(_) => 4,
                E::InvalidParameter { .. }
                | E::InvalidGrid(_)
                | E::DegenerateCat(_)
                | E::Index { .. }
                | E::Unbounded(_) => 2,
                _ => 3,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cavfb", version, about = "Cavity feedback experiments as CSV + JSON")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fidelity of an odd cat state under continuous feedback, one curve per eta.
    FidelityCat(Flags),
    /// Fidelity of a two-level Fock superposition, numeric and closed form.
    FidelityFock(Flags),
    /// Wigner function of an odd cat after continuous or stroboscopic evolution.
    Wigner(Flags),
    /// Probe statistics P_e(nT) of the stroboscopic scheme.
    StroboPe(Flags),
    /// Worst-case fidelity of Fock-pair qubits and the optimal-pair table.
    QubitProtect(Flags),
    /// Adiabatic one-photon transfer against the coupling strength.
    Adiabatic(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FidelityCat(_) => "fidelity-cat",
            Command::FidelityFock(_) => "fidelity-fock",
            Command::Wigner(_) => "wigner",
            Command::StroboPe(_) => "strobo-pe",
            Command::QubitProtect(_) => "qubit-protect",
            Command::Adiabatic(_) => "adiabatic",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::FidelityCat(f)
            | Command::FidelityFock(f)
            | Command::Wigner(f)
            | Command::StroboPe(f)
            | Command::QubitProtect(f)
            | Command::Adiabatic(f) => f,
        }
    }
}

/// Flags override values read from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file, or a sidecar from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Main CSV output; the sidecar goes to the same path with a .json extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Detection efficiencies, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta: Option<Vec<f64>>,
    /// Feedback-atom pulse areas, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub mu: Option<Vec<f64>>,
    /// Explicit time grid, or stroboscopic intervals gamma*T.
    #[arg(long = "gamma-t", value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma_t: Option<Vec<f64>>,
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    #[arg(long = "t-points")]
    pub t_points: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Highest Fock level n_max.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long = "grid-extent")]
    pub grid_extent: Option<f64>,
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,
    #[arg(long, value_enum)]
    pub evolution: Option<Evolution>,
    /// Fock pair n,m.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Weight |c_n|^2 of the lower level.
    #[arg(long)]
    pub weight: Option<f64>,
    #[arg(long = "eta-points")]
    pub eta_points: Option<usize>,
    /// Omega_max t_cross = g_max t_cross values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub couplings: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub input: Option<InputField>,
    /// Cavity damping rate in units of 1/t_cross.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Excited-state decay rate in units of 1/t_cross.
    #[arg(long = "gamma-e")]
    pub gamma_e: Option<f64>,
}

impl Flags {
    fn overrides(&self) -> ExperimentConfig {
        ExperimentConfig {
            alpha2: self.alpha2,
            eta: self.eta.clone(),
            mu: self.mu.clone(),
            gamma_t: self.gamma_t.clone(),
            t_max: self.t_max,
            t_points: self.t_points,
            steps: self.steps,
            dim: self.dim,
            grid_extent: self.grid_extent,
            grid_points: self.grid_points,
            evolution: self.evolution,
            levels: self.levels.clone(),
            weight: self.weight,
            eta_points: self.eta_points,
            couplings: self.couplings.clone(),
            input: self.input,
            gamma: self.gamma,
            gamma_e: self.gamma_e,
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        Ok(base.overlay(self.overrides()))
    }
}

pub fn execute(command: &str, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match command {
        "fidelity-cat" => commands::fidelity_cat(cfg),
        "fidelity-fock" => commands::fidelity_fock(cfg),
        "wigner" => commands::wigner(cfg),
        "strobo-pe" => commands::strobo_pe(cfg),
        "qubit-protect" => commands::qubit_protect(cfg),
        "adiabatic" => commands::adiabatic(cfg),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

/// Runs one subcommand and writes its files. Files are written even when an
/// invariant fails; the error then carries exit code 3.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let name = cli.command.name();
    let flags = cli.command.flags();
    let cfg = flags.resolve()?;
    let out = flags.out.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    run_to(name, &cfg, &out)
}

pub fn run_to(command: &str, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let outcome = execute(command, cfg)?;
    let written = output::write_outcome(command, out, &outcome)?;
    match outcome.checks.failures() {
        0 => Ok(written),
        failed => Err(CliError::Invariant {
            failed,
            sidecar: output::sidecar_path(out).display().to_string(),
        }),
    }
}

/// Caps the global thread pool at `THREADS` when that variable is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| CliError::Config(format!("THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("THREADS: {e}")))
}
