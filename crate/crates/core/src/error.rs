use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: ||H - H^dagger|| = {defect:.3e} (scale {scale:.3e})")]
    NotHermitian { defect: f64, scale: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("state norm drifted by {drift:.3e} during propagation (dt too large or H not Hermitian)")]
    NormDrift { drift: f64 },

    #[error("basis dimension {dim} exceeds the configured limit {limit}")]
    BasisTooLarge { dim: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("charge cutoff {cutoff} is not converged (relative change {change:.3e} under cutoff + 5)")]
    ChargeCutoff { cutoff: usize, change: f64 },

    #[error("target frequency {target} GHz outside achievable band [{low}, {high}] GHz")]
    OutOfBand { target: f64, low: f64, high: f64 },

    #[error("branch tracking failed: {0}")]
    BranchTracking(String),

    #[error("ambiguous dressed-state assignment for {label}: overlap {overlap:.3}")]
    AmbiguousAssignment { label: String, overlap: f64 },

    #[error("minimum separation at grid edge (index {index}); widen the grid")]
    GridEdge { index: usize },

    #[error("leakage {leakage:.3e} on input {input} exceeds 5%")]
    Leakage { input: String, leakage: f64 },

    #[error("conditional phase pi not reachable; achievable range [{min:.3}, {max:.3}] rad")]
    PhaseUnreachable { min: f64, max: f64 },

    #[error("missing tomography settings: {0:?}")]
    MissingSettings(Vec<String>),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
