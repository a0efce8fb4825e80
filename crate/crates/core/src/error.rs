use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation outside the domain 1 <= tau <= t (t = {t}, tau = {tau})")]
    Domain { t: f64, tau: f64 },

    #[error("integration failed on [{from}, {to}]: {reason}")]
    IntegrationFailure { from: f64, to: f64, reason: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("supremum at tau = {tau} still increasing at the grid edge {edge}")]
    UnboundedSupremum { tau: f64, edge: f64 },

    #[error("restriction of T({t}, {tau}) to the unstable subspace is numerically singular (sigma_min/sigma_max = {ratio:e})")]
    SingularRestriction { t: f64, tau: f64, ratio: f64 },

    #[error("ambiguous stable/unstable split at tau = {tau}: fitted exponent {exponent} inside the dead zone")]
    AmbiguousSplit { tau: f64, exponent: f64 },

    #[error("T({tau}, 1) Z is numerically rank deficient")]
    RankCollapse { tau: f64 },

    #[error("stable and unstable subspaces at tau = {tau} are not complementary (condition number {cond:e})")]
    NonComplementary { tau: f64, cond: f64 },

    #[error("grid too sparse: window [{start}, {end}] contains {points} points (need at least 4)")]
    WindowCoverage { start: f64, end: f64, points: usize },

    #[error("Picard iteration did not converge after {iterations} iterations (last update {last_update:e})")]
    PicardNonConvergence { iterations: usize, last_update: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

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
