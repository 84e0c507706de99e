use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The market price of risk vanishes (`mu == r`), so the pricing kernel
    /// degenerates and the dual problem is meaningless.
    #[error("degenerate market: mu = r gives a zero Sharpe ratio")]
    DegenerateMarket,

    /// Well-posedness requires `delta > h`.
    #[error("ill-posed model: delta = {delta} must exceed h = {h}")]
    IllPosed { delta: f64, h: f64 },

    /// A parameter or argument is outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver did not reach its tolerance.
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergent { what: &'static str, iterations: usize },

    /// A defining equation failed its residual threshold.
    #[error("tolerance violation in `{equation}`: residual {residual:e} exceeds {limit:e}")]
    ToleranceViolation {
        equation: String,
        residual: f64,
        limit: f64,
    },

    /// The corner `theta = theta_lower`, where the optimizer set is the whole
    /// digital family rather than a single law.
    #[error("corner case: theta equals theta_lower; use the digital family")]
    CornerCase,

    /// The replication wealth ratio came out non-positive, which admissible
    /// laws cannot produce.
    #[error("degenerate wealth ratio v = {0}")]
    DegenerateWealth(f64),

    /// `theta*(0)` is numerically indistinguishable from zero; the caller is
    /// told so that the zero branch can be used instead.
    #[error("inconsistent branch: theta*(0) = {0} is within the zero band")]
    InconsistentBranch(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
