use thiserror::Error;

/// Errors raised by model algebra, likelihood engines, estimators and the
/// simulation lab.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("model is not stationary: {0}")]
    NonStationary(String),
    #[error("pole set is not closed under complex conjugation")]
    NotConjugateClosed,
    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("lag {lag} is beyond the tabulated covariance (length {len})")]
    LagOutOfRange { lag: usize, len: usize },
    #[error("frequency {0} outside [0, 0.5]")]
    FreqOutOfRange(f64),
    #[error("model order is zero; no state-space form")]
    ZeroOrder,
    #[error("transition matrix is nearly defective: {0}")]
    NearDefective(String),
    #[error("samples at times {first} and {second} round to the same grid index {index}")]
    GridCollision { first: f64, second: f64, index: usize },
    #[error("too many observations for the covariance-matrix engine: {n_a} > {limit}")]
    TooLarge { n_a: usize, limit: usize },
    #[error("innovation variance {0:e} is not positive")]
    SingularInnovation(f64),
    #[error("gap {0} missing from the precomputed cache")]
    MissingGap(usize),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("all optimizer starts failed")]
    AllStartsFailed,
    #[error("objective is not finite at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("sampler diverged on {divergences} of {iterations} iterations")]
    DivergedBadly { divergences: usize, iterations: usize },
    #[error("posterior chain is empty")]
    EmptyChain,
    #[error("subsampling left fewer than 2 observations ({0})")]
    Degenerate(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("forced failure for run {0}")]
    Injected(usize),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
            _ => Error::InvalidInput(e.to_string()),
        }
    }
}

impl Error {
    /// True for errors caused by malformed user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::GridCollision { .. }
                | Error::InvalidInput(_)
                | Error::NotConjugateClosed
                | Error::FreqOutOfRange(_)
                | Error::LagOutOfRange { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
