use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("transition matrix must be square with at least 2 states (got {rows}x{cols})")]
    BadShape { rows: usize, cols: usize },

    #[error("matrix row {row} (0-based) is not stochastic: {reason}")]
    NotStochastic { row: usize, reason: String },

    #[error("transition graph is not strongly connected (ergodicity fails)")]
    Reducible,

    #[error("observable does not fit the model: {0}")]
    Incompatible(String),

    #[error("window does not cover coordinates [{start}, {end})")]
    WindowMismatch { start: i64, end: i64 },

    #[error("value table would need {requested} entries, cap is {cap}")]
    CapExceeded { requested: u128, cap: usize },

    #[error("operation requires a {expected} model")]
    SidednessMismatch { expected: &'static str },

    #[error("invalid filtration index {0} for a one-sided model")]
    InvalidIndex(i64),

    #[error("observable is not centered: E(f) = {0:e}")]
    NotCentered(f64),

    #[error("series terms stopped decaying after {steps} steps (last norm {last_norm:e})")]
    Diverging { steps: usize, last_norm: f64 },

    #[error("series not summable within {steps} terms (last term {last_term:e})")]
    NonSummable { steps: usize, last_term: f64 },

    #[error("sigma^2 = {0:e} is below the degeneracy tolerance")]
    DegenerateSigma(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
