use thiserror::Error;

/// Errors produced while building models or designing robust tests.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density model: {0}")]
    InvalidModel(String),

    #[error("cannot parse density spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("alpha = {0} is inside the guard band around 0 or 1")]
    GuardBand(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("support violation: g > 0 where f = 0 makes the alpha-divergence infinite for alpha > 1")]
    SupportViolation,

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("parametric form infeasible: {0}")]
    InfeasibleForm(String),

    #[error(
        "robustness parameters (eps0 = {eps0}, eps1 = {eps1}) are not strictly inside the feasibility boundary (margin = {margin:.6e})"
    )]
    Infeasible { eps0: f64, eps1: f64, margin: f64 },

    #[error("solver did not converge after {iterations} iterations (best residual norm {residual:.3e} at l_l = {lower}, l_u = {upper})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        lower: f64,
        upper: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no boundary point: {0}")]
    NoBoundaryPoint(String),

    #[error("pair (eps0 = {eps0}, eps1 = {eps1}) is not attained by any nominal pair (a = {a})")]
    InfeasiblePair { eps0: f64, eps1: f64, a: f64 },

    #[error("maximization over the divergence ball failed: {0}")]
    BallConstraint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the underlying failure is a closed output pipe.
    pub fn is_broken_pipe(&self) -> bool {
        let io = match self {
            Error::Io(e) => Some(e.kind()),
            Error::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e.kind()),
                _ => None,
            },
            Error::Json(e) => e.io_error_kind(),
            _ => None,
        };
        io == Some(std::io::ErrorKind::BrokenPipe)
    }
}
