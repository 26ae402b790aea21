use thiserror::Error;

/// Errors raised by validation and by the numerical operations.
///
/// Validation errors name the offending indices so that bad inputs can be
/// located in large tensors without a debugger.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distance matrix is not square: {rows} rows, {cols} cols")]
    NotSquare { rows: usize, cols: usize },
    #[error("distance entry ({i},{j}) is not finite")]
    NonFiniteDistance { i: usize, j: usize },
    #[error("negative distance at ({i},{j}): {value}")]
    NegativeDistance { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal distance at ({i},{i}): {value}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("asymmetric metric: dist[{i}][{j}] = {forward} but dist[{j}][{i}] = {backward}")]
    AsymmetricMetric {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    #[error("distinct points {i} and {j} are at distance zero")]
    ZeroDistanceDistinctPoints { i: usize, j: usize },
    #[error("triangle inequality violated: d({i},{k}) = {direct} > d({i},{j}) + d({j},{k}) = {via}")]
    TriangleViolation {
        i: usize,
        j: usize,
        k: usize,
        direct: f64,
        via: f64,
    },

    #[error("probability mass at {index} is negative: {value}")]
    NegativeMass { index: usize, value: f64 },
    #[error("probability mass at {index} is not finite")]
    NonFiniteMass { index: usize },
    #[error("probability masses sum to {sum}, expected 1 within {tolerance}")]
    UnnormalizedMass { sum: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch for {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("discount factor must lie in [0,1), got {gamma}")]
    InvalidDiscount { gamma: f64 },
    #[error("reward entry ({s},{a},{next}) is not finite")]
    NonFiniteReward { s: usize, a: usize, next: usize },

    #[error("linear system is singular or produced non-finite values ({context})")]
    SingularSystem { context: &'static str },
    #[error("the two expected-return formulas disagree: {via_values} vs {via_distribution}")]
    ConsistencyFailure {
        via_values: f64,
        via_distribution: f64,
    },
    #[error("exact identity violated: |lhs - rhs| = {residual} exceeds {tolerance}")]
    IdentityViolation { residual: f64, tolerance: f64 },

    #[error("no lattice candidate satisfies the contraction condition")]
    NoApplicableCandidate,
    #[error("contraction condition still violated after {rounds} smoothing rounds (gamma*L_p*(1+L_pi) = {contraction})")]
    ContractionUnreachable { rounds: usize, contraction: f64 },

    #[error("transport solver failed to converge ({context})")]
    TransportFailure { context: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
