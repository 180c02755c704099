//! Error type shared by all solver modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Kernel has divergent mass and cannot be normalized (algebraic exponent <= 1).
    #[error("kernel is not normalizable: {0}")]
    NonNormalizable(String),

    /// Exponential moment does not exist at the requested rate.
    #[error("divergent exponential moment at lambda = {lambda} (abscissa {abscissa})")]
    DivergentMoment { lambda: f64, abscissa: f64 },

    /// Two gridded objects do not share a spacing/lattice.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An iteration failed to converge within its cap.
    #[error("no convergence in {context} after {iterations} iterations (metric {metric:.3e})")]
    NoConvergence {
        context: &'static str,
        iterations: usize,
        metric: f64,
    },

    /// No finite critical interval length exists (growth dominates dispersal).
    #[error("no finite threshold length: {0}")]
    NoFiniteThreshold(String),

    /// The requested interval is below kernel/grid resolution.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    /// Doubling the truncated half-line moved the solution more than allowed.
    #[error("half-line truncation unstable: {0}")]
    TruncationUnstable(String),

    /// A crowding weight failed its nonincreasing check.
    #[error("weight is not nonincreasing: {0}")]
    WeightNotMonotone(String),

    /// Minimal wave speed requires a finite exponential moment.
    #[error("kernel violates the thin-tail condition (exponential moment abscissa is 0)")]
    ThinTailViolated,

    /// Semi-waves require a finite first moment.
    #[error("kernel has infinite first moment; no semi-wave exists")]
    FatTailViolatesJ1,

    /// A field value left the invariant box by more than the clamping slack.
    #[error("stability violated at t = {t}: {detail}")]
    StabilityViolated { t: f64, detail: String },

    /// Speed estimation was asked for with too little history.
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    /// The critical-expansion-rate problem is posed outside its regime.
    #[error("no critical expansion rate exists in this regime: {0}")]
    NoRegime(String),

    /// Bisection on the expansion rate could not classify a midpoint run.
    #[error("classification undecided at mu = {mu} after horizon extension")]
    UndecidedAtMidpoint { mu: f64 },
}
