use thiserror::Error;

/// Errors raised by the solvers and the command-line front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: last estimate {last}, previous {previous}")]
    Quadrature { last: f64, previous: f64 },

    #[error("occupancy cutoff insufficient at n_max = {n_max}: {detail}")]
    CutoffInsufficient { n_max: usize, detail: String },

    #[error("gapless single-site spectrum (lambda = 0, mu_eff = {mu_eff} >= 1): series diverges")]
    Gapless { mu_eff: f64 },

    #[error("bracket expansion failed: {0}")]
    Bracket(String),

    #[error("dimension guard exceeded: {0}")]
    DimensionGuard(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
