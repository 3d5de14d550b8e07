use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semidefinite (lambda_min = {lambda_min:e}, lambda_max = {lambda_max:e})")]
    NotPsd { lambda_min: f64, lambda_max: f64 },

    #[error("matrix is not positive definite (lambda_min = {lambda_min:e})")]
    NotPd { lambda_min: f64 },

    #[error("posterior is improper: {0}")]
    ImproperPosterior(String),

    #[error("posterior mode search did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("orthant enumeration needs 2^{p} scans, above the configured limit p_max = {p_max}")]
    CombinatorialBlowup { p: usize, p_max: usize },

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("no certificate: the optimized bound is vacuous (best log rate gap {best_log_gap})")]
    NoCertificate { best_log_gap: f64 },

    #[error("trace too short: {len} states with burn-in {burn_in} (need more than burn-in + 100)")]
    InsufficientLength { len: usize, burn_in: usize },

    #[error("diagnostic inconclusive: {0}")]
    DiagnosticInconclusive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
