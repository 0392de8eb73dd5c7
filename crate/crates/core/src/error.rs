use thiserror::Error;

/// Errors raised across the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("user placement failed after {retries} retries (user {user} kept landing on BS {bs})")]
    Placement { user: usize, bs: usize, retries: usize },

    #[error("correlation matrix of user {user} is indefinite (most negative eigenvalue {most_negative:e})")]
    Indefinite { user: usize, most_negative: f64 },

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("invalid port selection: {0}")]
    Selection(#[from] SelectionError),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate statistics: all eigenvalues below tolerance")]
    DegenerateStatistics,

    #[error("divergent moment for user {user}: rank {rank} must exceed {required}")]
    DivergentMoment { user: usize, rank: usize, required: usize },

    #[error("zero-forcing failed: reconstructed channel of user {user} is rank deficient")]
    Precoder { user: usize },

    #[error("Monte Carlo aborted: {rejected} of {requested} realizations rejected")]
    TooManyRejections { rejected: usize, requested: usize },

    #[error("enumeration space {size} exceeds limit {limit}")]
    SearchSpace { size: u128, limit: u128 },

    #[error("rate evaluation failed in round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Constraint violations of a port selection.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("BS {bs}: port {port} assigned to both user {user} and user {other}")]
    Shared { bs: usize, user: usize, other: usize, port: usize },

    #[error("BS {bs}, user {user}: port {port} out of range (M = {m})")]
    OutOfRange { bs: usize, user: usize, port: usize, m: usize },

    #[error("BS {bs}, user {user}: duplicate port {port}")]
    Duplicate { bs: usize, user: usize, port: usize },

    #[error("user {user}: {count} ports exceed budget {budget}")]
    Budget { user: usize, count: usize, budget: usize },

    #[error("selection shape {got:?} does not match configuration {expected:?}")]
    Shape { expected: (usize, usize, usize), got: (usize, usize, usize) },

    #[error("infeasible counts at BS {bs}: {needed} ports requested, {available} available")]
    Infeasible { bs: usize, needed: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
