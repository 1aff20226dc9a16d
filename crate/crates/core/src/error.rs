use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// `αβ = 0`: the fixed points form continua instead of four isolated points.
    #[error("degenerate parameters (alpha*beta = 0): fixed points are not isolated")]
    DegenerateParams,

    #[error(
        "crossing of a half-integer line detected at n = {n} (k = {k}) but the doubled orbit \
         misses its target by {miss:e}; retry with a tighter crossing tolerance"
    )]
    ToleranceAmbiguous { n: u64, k: i64, miss: f64 },

    #[error("polygon has no vertices")]
    EmptyPolygon,

    #[error("upper endpoint beta = {beta_hi} at alpha = {alpha} was not detected as diffusive within budget")]
    UpperEndpointNotDiffusive { alpha: f64, beta_hi: f64 },

    #[error("not certified: rigorous bound {rigorous_bound} >= target {target}")]
    NotCertified { rigorous_bound: f64, target: f64 },

    #[error("rescaling requires alpha > 0, got {0}")]
    NonpositiveAlpha(f64),

    #[error("tolerance {tol:e} unreachable: step size underflowed")]
    ToleranceUnreachable { tol: f64 },

    #[error("curve construction failed at step {step}: {reason}")]
    CurveLost { step: usize, reason: &'static str },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
