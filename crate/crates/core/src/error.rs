use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pattern has {vertices} vertices, cap is {cap}")]
    PatternTooLarge { vertices: usize, cap: usize },

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("pattern parse error at line {line}: {message}")]
    PatternParse { line: usize, message: String },

    #[error("degenerate probability p = {0}")]
    DegenerateProbability(f64),

    #[error("degenerate variance: the copy count is almost surely constant")]
    DegenerateVariance,

    #[error("{what} budget exceeded: need {needed}, limit {limit}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("configuration space has 2^{edges} points, cap is 2^{cap}")]
    OracleTooLarge { edges: usize, cap: usize },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("|t| = {t} lies outside the validity range |t| <= {limit}")]
    OutOfRange { t: f64, limit: f64 },

    #[error("adaptive quadrature did not converge (estimated error {error:e})")]
    QuadratureNonConvergence { error: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn check_open_probability(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateProbability(p))
    }
}
