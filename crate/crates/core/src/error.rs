use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {level} out of range (depth {depth})")]
    LevelOutOfRange { level: usize, depth: usize },

    #[error("invalid address: {0}")]
    InvalidAddress(String),

    #[error("branching factor mismatch: expected {expected}, found {found}")]
    BranchingMismatch { expected: usize, found: usize },

    #[error("cells must be distinct")]
    EqualCells,

    #[error("negative argument {0}")]
    NegativeArgument(f64),

    #[error("modular is not monotone near k = {0}")]
    NonMonotoneModular(f64),

    #[error("could not bracket the gauge within {0} doublings")]
    GaugeBracket(usize),

    #[error("pair budget exceeded: {pairs} pairs > {budget}")]
    PairBudget { pairs: u128, budget: u128 },

    #[error("instance too large for the grid oracle: {0}")]
    OracleTooLarge(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
