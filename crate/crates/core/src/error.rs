use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spatial lag with h^2 = {h_sq} is not realizable on a {n}x{n} grid")]
    UnrealizableLag { h_sq: u64, n: usize },

    #[error("lag {0} is not a grid distance (h^2 must be an integer sum of two squares)")]
    NotGridDistance(f64),

    #[error("no closed-form pair count for h^2 = {0}")]
    UnsupportedLag(u64),

    #[error("invalid argument: {0}")]
    InvalidArgs(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("covariance matrix is not positive semi-definite (largest jitter tried: {jitter:e})")]
    NotPsd { jitter: f64 },

    #[error("{sites} joint sites exceed the dense factorization budget of {budget}")]
    BudgetExceeded { sites: usize, budget: usize },

    #[error("shift vector ({0}, {1}) is not integer-valued; grid simulation needs integer shifts")]
    NonIntegerShift(f64, f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("field margins are {found}, expected {expected}")]
    WrongMargins { found: String, expected: String },

    #[error("block size {block} does not divide extent {extent}")]
    IndivisibleBlocks { block: usize, extent: usize },

    #[error("series length {len} does not equal period x years = {expected}")]
    LengthMismatch { len: usize, expected: usize },

    #[error("optimizer failed to converge: {0}")]
    NoConvergence(String),

    #[error("GEV support violated at the fitted parameters")]
    SupportViolation,

    #[error("insufficient lags: {have} available, {need} parameters to estimate")]
    InsufficientLags { have: usize, need: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
