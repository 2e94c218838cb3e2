use thiserror::Error;

/// Errors raised by the toolkit. Checker findings (a condition failing up to
/// the horizon, an inclusion not holding) are reported through report values,
/// never through this type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: need a < b and at least 2 points (got a={a}, b={b}, m={m})")]
    InvalidGrid { a: f64, b: f64, m: usize },

    #[error("metric space must contain at least one point")]
    EmptySpace,

    #[error("distance matrix shape mismatch: expected {expected}x{expected} entries")]
    MatrixShape { expected: usize },

    #[error("distance entry ({i},{j}) = {value} is not a finite nonnegative real")]
    BadDistance { i: usize, j: usize, value: f64 },

    #[error("metric axioms violated: {0}")]
    NotAMetric(String),

    #[error("point index {index} out of range for a space of {len} points")]
    InvalidIndex { index: usize, len: usize },

    #[error("radius/level must be a nonnegative real, got {0}")]
    NegativeLevel(f64),

    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("function has {got} values but the space has {expected} points")]
    LengthMismatch { expected: usize, got: usize },

    #[error("function value at point {index} is {value}; only finite reals and +inf are allowed")]
    BadValue { index: usize, value: f64 },

    #[error("function is not proper: every value is +inf")]
    Improper,

    #[error("operands live on different metric spaces")]
    SpaceMismatch,

    #[error("perturbations must be finite-valued (point {index} is +inf)")]
    NotFinite { index: usize },

    #[error("sequence must contain at least one term")]
    EmptySequence,

    #[error("perturbation spaces need at least two points")]
    SpaceTooSmall,

    #[error("space too coarse to certify a bump at center {center} with eps={eps}")]
    TooCoarse { center: usize, eps: f64 },

    #[error("modulus certificate fails: dist({x},{y}) = {dist} <= {delta} but |g(x)-g(y)| = {jump} > {eps}")]
    ModulusViolated {
        x: usize,
        y: usize,
        dist: f64,
        delta: f64,
        jump: f64,
        eps: f64,
    },

    #[error("localization did not reach diameter <= {tol} within {iterations} iterations")]
    NotLocalized { tol: f64, iterations: usize },

    #[error("perturbation budget exhausted at iteration {iteration}: step eps={eps} has no usable delta")]
    BudgetExhausted { iteration: usize, eps: f64 },

    #[error("replay diverged at transcript row {row}: {reason}")]
    ReplayMismatch { row: usize, reason: String },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
