//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// Adjustment outside the effective domain of the support function.
    #[error("adjustment nu = {nu} outside effective domain (margin constraints require nu <= 0)")]
    InvalidAdjustment { nu: f64 },

    #[error("singular tridiagonal system: zero pivot at row {row}")]
    SingularTridiagonal { row: usize },

    #[error("singular linear system: zero pivot at column {col}")]
    SingularMatrix { col: usize },

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    LinearSolve { residual: f64, tol: f64 },

    #[error("malformed sparse system: {reason}")]
    MalformedSparse { reason: String },

    #[error(
        "root solve stalled after {iters} iterations; best residual {residual:.3e} at {best:?}"
    )]
    RootNonConvergence {
        iters: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("no active set verified at state {omega:?}")]
    ActiveSetExhausted { omega: Vec<f64> },

    #[error("volatility iterate pinned at floor {floor:.3e}; solution rejected as non-physical")]
    VolatilityFloor { floor: f64 },

    #[error("grid resolution K = {k} too coarse (need K >= {min})")]
    GridTooCoarse { k: usize, min: usize },

    #[error("unsupported agent count N = {n} (solvers cover N in {{2, 3}})")]
    UnsupportedAgentCount { n: usize },

    #[error("point {omega:?} lies outside the state simplex")]
    OutOfDomain { omega: Vec<f64> },

    #[error(
        "transversality violated for agent {agent} at the vertex where agent {dominant} \
         dominates (denominator {denom:.6e} <= 0)"
    )]
    Transversality {
        agent: usize,
        dominant: usize,
        denom: f64,
    },

    #[error(
        "agent {agent} margin m = {margin} < 1: the dominant agent cannot hold the market \
         at its vertex"
    )]
    VertexMarginTooTight { agent: usize, margin: f64 },

    #[error("point solve failed at {location}")]
    PointSolve {
        location: String,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "pseudo-time iteration exceeded {max_steps} steps (update norm {update:.3e}, dt {dt:.3e})"
    )]
    MaxSteps {
        max_steps: usize,
        update: f64,
        dt: f64,
    },

    #[error("field sets live on different grids")]
    GridMismatch,

    #[error("regression design matrix is collinear (column {col})")]
    Collinear { col: usize },

    #[error("degenerate sample: {reason}")]
    DegenerateSample { reason: String },
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
