use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("unsupported basis: {0}")]
    UnsupportedBasis(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("reduction failed: {0}")]
    Reduction(String),

    #[error("unbounded strip: {0}")]
    UnboundedStrip(String),

    #[error("moment vector is not in the interior of the cone: {0}")]
    NotInterior(String),

    #[error("Prony recovery produced non-real atoms (max |Im| = {max_imag:e})")]
    NonrealAtoms { max_imag: f64 },

    #[error("Prony recovery produced negative weights (min weight = {min_weight:e})")]
    InfeasibleWeights { min_weight: f64 },

    #[error("ill-conditioned system: {0}")]
    Conditioning(String),

    #[error("Hankel slice is rank deficient for k = {k}")]
    RankDeficient { k: usize },

    #[error("not enough moments: {0}")]
    InsufficientMoments(String),

    #[error("moment residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("infeasible moment vector: {0}")]
    Infeasible(String),

    #[error("no Dirac representation found: {0}")]
    NoDiracRepresentation(String),

    #[error("singular start: {0}")]
    SingularStart(String),

    #[error("recovery failed: {0}")]
    RecoveryFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
