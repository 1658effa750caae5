use thiserror::Error;

/// Errors produced by the simulator core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("operation requires topology {expected}, got {actual}")]
    WrongTopology {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} outside schedule range [0, {t_star}]")]
    TimeOutOfRange { t: f64, t_star: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix of dimension {dim} exceeds eigensolver cap {cap}")]
    MatrixTooLarge { dim: usize, cap: usize },

    #[error("eigensolver did not converge for {dim}x{dim} matrix at tolerance {tolerance:e}")]
    NoConvergence { dim: usize, tolerance: f64 },

    #[error("winding number undefined: {0}")]
    WindingUndefined(String),

    #[error("near-degenerate levels at t = {t}: |E_m - E_n| = {gap:e}")]
    NearDegenerate { t: f64, gap: f64 },

    #[error("gap-state continuity lost at t = {t}: best overlap {overlap:.4} < 0.5")]
    ContinuityLost { t: f64, overlap: f64 },

    #[error("stability guard violated: dt * max|H| = {product:.4} > 0.1 (dt = {dt:e})")]
    StabilityGuard { dt: f64, product: f64 },

    #[error("non-finite amplitude encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("phase undefined: end-site amplitude {amplitude:e} below 1e-6")]
    PhaseUndefined { amplitude: f64 },

    #[error("cubic fit needs at least 4 distinct abscissae, got {0}")]
    RankDeficient(usize),

    #[error("ensemble had {} failed realization(s), first at index {}: {}", failures.len(), failures[0].0, failures[0].1)]
    EnsembleFailures { failures: Vec<(usize, String)> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
