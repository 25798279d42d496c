mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Nonclassicality quantifiers from characteristic functions.
#[derive(Parser)]
#[command(name = "qncq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute bound tables chi_r(|beta|) and write one CSV per r.
    Bounds(BoundsArgs),
    /// Exact DNC of a finite Fock-space density matrix.
    Dnc(DncArgs),
    /// Tabulate |Phi| of a state on a radial grid.
    Cf(CfArgs),
    /// Certify a DNC lower bound for a state or sampled CF data.
    Witness(WitnessArgs),
    /// Photon addition or subtraction on a Fock-space density matrix.
    Photon(PhotonArgs),
}

#[derive(Args, Serialize)]
pub struct BoundsArgs {
    /// Rank or inclusive range, e.g. `3` or `2..5`.
    #[arg(long, default_value = "2..5")]
    pub r: String,
    #[arg(long, default_value_t = 5.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Random starts per grid point: `auto` (2^{4(r-1)}, capped) or a number.
    #[arg(long, default_value = "auto")]
    pub restarts: String,
    /// Lift the cap on `--restarts auto`.
    #[arg(long)]
    pub no_restart_cap: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write `normalized.csv` with chi_r e^{-beta^2/2} side by side for every r.
    #[arg(long)]
    pub normalized: bool,
    /// Exit 0 even if some rows did not converge.
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Args, Serialize)]
pub struct DncArgs {
    /// Density-matrix JSON (`{"dim", "entries"}` or a `fock_matrix` state spec).
    pub input: PathBuf,
    /// Populations below this count as zero.
    #[arg(long, default_value_t = qncq::focktools::DEFAULT_TOL)]
    pub tol: f64,
    /// Relative threshold for dropping CF polynomial coefficients.
    #[arg(long, default_value_t = qncq::charfn::ZERO_TOLERANCE)]
    pub zero_tol: f64,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CfArgs {
    /// State spec JSON.
    pub spec: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct WitnessArgs {
    /// State spec JSON.
    #[arg(long, required_unless_present = "samples", conflicts_with = "samples")]
    pub spec: Option<PathBuf>,
    /// Sampled CF CSV `beta_re,beta_im,phi_re,phi_im,sigma`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Directory holding `chi_<r>.csv` tables.
    #[arg(long)]
    pub tables: PathBuf,
    /// Required significance in standard errors (default 5 for samples, 0 for specs).
    #[arg(long)]
    pub k_sigma: Option<f64>,
    /// Skip samples beyond the tables' range instead of failing.
    #[arg(long)]
    pub clip: bool,
    /// Scan the mixture weight `|lambda|` as `start:stop:step` (squeezed-vacuum specs).
    #[arg(long, conflicts_with = "samples")]
    pub scan_lambda: Option<String>,
    /// Write the report (or scan CSV) here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct PhotonArgs {
    #[arg(value_enum)]
    pub op: PhotonOp,
    /// Density-matrix JSON.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = qncq::focktools::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhotonOp {
    Add,
    Subtract,
}

fn init_threads() {
    let Ok(v) = std::env::var("QNCQ_THREADS") else { return };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("QNCQ_THREADS ignored: {e}");
            }
        }
        _ => log::warn!("QNCQ_THREADS = {v:?} is not a positive integer; ignored"),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use qncq::Error as E;
    match err.downcast_ref::<qncq::Error>() {
        Some(E::NonConvergence { .. }) => 2,
        Some(E::RangeMismatch { .. }) => 4,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    init_threads();
    let result = match cli.command {
        Command::Bounds(a) => commands::bounds(&a),
        Command::Dnc(a) => commands::dnc(&a),
        Command::Cf(a) => commands::cf(&a),
        Command::Witness(a) => commands::witness(&a),
        Command::Photon(a) => commands::photon(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
