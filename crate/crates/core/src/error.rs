use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Coulomb softening drove a local transverse frequency imaginary.
    #[error("chain unstable: local frequency of ion {ion} is imaginary (radicand {radicand:.6e} rad^2/s^2)")]
    ChainUnstable { ion: usize, radicand: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("collective mode {mode} has zero frequency; occupancy estimate diverges")]
    SingularMode { mode: usize },

    #[error("model is not in equilibrium mode (lowest collective frequency {lowest:.6e} rad/s <= 0); ground state is unbounded")]
    NotEquilibrium { lowest: f64 },

    #[error("Hilbert space dimension {dimension} (log2 = {log2:.2}) exceeds budget {budget}")]
    ResourceGuard { dimension: u128, log2: f64, budget: u128 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
