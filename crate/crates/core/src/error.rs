use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (term {label} has coefficient {coeff})")]
    NonHermitian { label: String, coeff: String },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("expectation value has imaginary part {imag:e}")]
    ComplexExpectation { imag: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("unknown basis '{0}' (expected x, y or z)")]
    UnknownBasis(String),

    #[error("imaginary time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("inverse temperature must be positive, got {0}")]
    InvalidBeta(f64),

    #[error("Hilbert space dimension {dim} exceeds dense guard {max}")]
    DimensionGuard { dim: usize, max: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("ansatz growth stalled at tau = {tau}: McLachlan distance {distance:e} above threshold {threshold:e}")]
    NonConvergence { tau: f64, distance: f64, threshold: f64 },

    #[error("Krylov propagation failed: {0}")]
    Krylov(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("need at least {needed} kept records, found {found}")]
    TooFewRecords { needed: usize, found: usize },

    #[error("unknown observable '{0}'")]
    UnknownObservable(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("walk {walk}, step {step}: {source}")]
    Walk {
        walk: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True when the failure is a numerical non-convergence, possibly wrapped in walk context.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::Krylov(_) => true,
            Error::Walk { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}
