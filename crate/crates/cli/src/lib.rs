//! `ptamp`: command-line front end for the pt-amplifier pipeline.
//!
//! Every command writes deterministic CSV (17 significant digits) into the
//! output directory and reports what it wrote on stdout.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use pt_amplifier::ErrorKind;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("accuracy failure: {0}")]
    Accuracy(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 1 I/O, 2 configuration, 3 domain (broken PT, singularity), 4 accuracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Accuracy(_) => 4,
        }
    }
}

impl From<pt_amplifier::Error> for CliError {
    fn from(e: pt_amplifier::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Argument => CliError::Config(msg),
            ErrorKind::Domain => CliError::Domain(msg),
            ErrorKind::Accuracy => CliError::Accuracy(msg),
        }
    }
}

macro_rules! core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                pt_amplifier::Error::from(e).into()
            }
        }
    )*};
}

core_error!(
    pt_amplifier::numerics::NumericsError,
    pt_amplifier::signals::SignalError,
    pt_amplifier::metric::MetricError,
    pt_amplifier::ep::EpError,
    pt_amplifier::states::StatesError,
    pt_amplifier::wigner::WignerError
);

#[derive(Debug, Parser)]
#[command(name = "ptamp", version, about = "PT-symmetric amplifier pipeline: figure data as CSV")]
pub struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Compare closed forms against numerical oracles where available.
    #[arg(long, global = true)]
    pub oracle_check: bool,
    /// Numerical tolerance (overrides the configuration).
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boolean unbroken-PT grid over the (alpha, beta) plane.
    PtRegion {
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
        alpha: Option<Vec<f64>>,
        #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], allow_negative_numbers = true)]
        beta: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Solve the metric at one time and report the Hermitian partner.
    MetricSolve {
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        kappa: Option<f64>,
    },
    /// Ermakov-Pinney solutions.
    Ep {
        #[command(subcommand)]
        mode: EpCommand,
    },
    /// Trajectory, phases, covariance and probability density.
    Evolve,
    /// Wigner grids of the cat state plus the origin-interference summary.
    Wigner,
    /// Every figure's data in one run.
    Figures,
}

#[derive(Debug, Subcommand)]
pub enum EpCommand {
    /// Numerical integration on the Hermitian partner of the amplifier.
    Solve,
    /// Closed-form toy branches and the smooth-variant verdict.
    Toy,
}

/// Resolves the configuration: file (if any), then command-line overrides,
/// then validation.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    match &cli.command {
        Command::PtRegion { alpha, beta, n } => {
            if let Some(a) = alpha {
                cfg.pt_region.alpha = [a[0], a[1]];
            }
            if let Some(b) = beta {
                cfg.pt_region.beta = [b[0], b[1]];
            }
            if let Some(n) = n {
                cfg.pt_region.n = *n;
            }
        }
        Command::MetricSolve { t, kappa } => {
            if let Some(t) = t {
                cfg.metric_time = *t;
            }
            if let Some(k) = kappa {
                cfg.kappa = *k;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let oracle = cli.oracle_check;
    match &cli.command {
        Command::PtRegion { .. } => commands::pt_region(&cfg).map(drop),
        Command::MetricSolve { .. } => commands::metric_solve(&cfg).map(|r| print!("{r}")),
        Command::Ep { mode: EpCommand::Solve } => commands::ep_solve(&cfg).map(drop),
        Command::Ep { mode: EpCommand::Toy } => commands::ep_toy(&cfg).map(drop),
        Command::Evolve => commands::evolve(&cfg).map(drop),
        Command::Wigner => commands::wigner(&cfg, oracle).map(drop),
        Command::Figures => commands::figures(&cfg, oracle).map(drop),
    }
}
