use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown player {0}")]
    UnknownPlayer(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("no MAC table can serve rate {0} bit/s")]
    NoMacTable(f64),

    #[error("member {0} has zero data rate toward the coalition AP")]
    ZeroRateMember(String),

    #[error("fixed-point iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    #[error("utility is not strictly increasing and concave: {0}")]
    NonConcaveUtility(String),

    #[error("worth must be positive, got {0}")]
    NonPositiveWorth(f64),

    #[error("negative worth {0}")]
    NegativeWorth(f64),

    #[error("instance too large for exhaustive search: {what} ({got} > {limit})")]
    SizeGuard {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("preference profile contains ties: {0}")]
    TiesInPreferences(String),

    #[error("proposal bound exceeded: {count} > {bound}")]
    ProposalBound { count: u64, bound: u64 },

    #[error("quota target {qhat} is not reachable by any coalition (max size {max_size})")]
    InfeasibleTarget { qhat: f64, max_size: usize },

    #[error("no feasible sigma in ({lo}, {hi}]")]
    NoFeasibleSigma { lo: f64, hi: f64 },

    #[error("load balancing needs at least 3 users for integer quotas, got {0}")]
    TooFewUsers(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
