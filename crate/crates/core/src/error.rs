use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate superposition: {0}")]
    DegenerateSuperposition(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid state parameters: {0}")]
    InvalidState(String),

    #[error("characteristic function overflows f64 (log-modulus {log_modulus:.1})")]
    OverflowGuard { log_modulus: f64 },

    #[error("polynomial order {order} does not match highest Fock index {highest_fock} (tolerance mismatch)")]
    InconsistentOrder { order: usize, highest_fock: usize },

    #[error("photon subtraction from the vacuum")]
    VacuumSubtraction,

    #[error("optimizer did not converge at |beta| = {beta_abs} (best value {best:.6e})")]
    NonConvergence { beta_abs: f64, best: f64 },

    #[error("{count} sample point(s) outside the bound-table range [0, {max_beta}]")]
    RangeMismatch { count: usize, max_beta: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
