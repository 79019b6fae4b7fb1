//! Markovian equilibrium solver for a continuous-time exchange economy with
//! heterogeneous CRRA agents facing margin constraints.
//!
//! The state variable is the vector of consumption weights on the unit
//! simplex. Aggregate quantities (market price of risk, interest rate, stock
//! volatility) are closed-form maps of the state, the agents' wealth to
//! consumption ratios `V_i`, and per-agent shadow adjustments `nu_i`. The
//! ratios solve a coupled nonlinear elliptic system which is integrated to
//! stationarity by an implicit pseudo-time scheme with Picard-frozen
//! coefficients:
//!
//! * [`vertex`] — closed forms where a single agent consumes everything;
//!   these supply Dirichlet data for everything else.
//! * [`edge`] — the two-agent ODE system on each simplex edge
//!   (tridiagonal solves), also the standalone two-agent solver.
//! * [`simplex`] — the three-agent PDE on the discretized simplex
//!   (nine-point stencil, block-sparse solves).
//! * [`fixed_point`] — the per-grid-point nonlinear system for the
//!   adjustments and volatility.
//! * [`postproc`] — portfolios, leverage, price/dividend and deviation
//!   fields from a converged solution.
//! * [`sim`] — Monte Carlo simulation of the consumption-weight SDE and
//!   leverage-cyclicality regressions.

pub mod edge;
pub mod error;
pub mod fixed_point;
pub mod grid;
pub mod model;
mod stepping;
pub mod numerics;
// TEMP pub mod postproc;
// TEMP pub mod sim;
// TEMP pub mod simplex;
pub mod vertex;

pub use edge::{solve_edge, EdgeProblem, EdgeSolution};
pub use error::{Error, Result};
pub use fixed_point::{active_set_solve, solve_point, PointInputs, PointSolution};
pub use grid::{EdgeKind, PointClass, SimplexGrid};
pub use model::{AgentSpec, EconomyParams, Margin, MarketState, StatePoint, WeightDynamics};
// TEMP pub use postproc::{DerivedFields, DeviationTable, FieldTable};
// TEMP pub use sim::{simulate, Conditioning, CyclicalityStats, FieldInterpolant, PathSample, SimConfig};
// TEMP pub use simplex::{solve_simplex, SimplexSolution};
pub use vertex::VertexSolution;

/// Shared knobs for the pseudo-time solvers.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SolverOptions {
    /// Initial pseudo-time step. Halved when the update norm diverges,
    /// grown while it decreases steadily.
    pub dt_init: f64,
    /// Outer stationarity tolerance on the max-norm update between sweeps.
    pub tol_outer: f64,
    /// Tolerance of the per-point adjustment/volatility solve.
    pub tol_point: f64,
    pub max_steps: usize,
    /// Force `nu = 0` at every point (complete-market benchmark run).
    pub force_unconstrained: bool,
    /// Optional under-relaxation factor in (0, 1]; 1 is full replacement.
    pub relaxation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dt_init: 0.5,
            tol_outer: 1e-8,
            tol_point: 1e-10,
            max_steps: 50_000,
            force_unconstrained: false,
            relaxation: 1.0,
        }
    }
}

/// Progress record of one pseudo-time integration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub steps: usize,
    /// Max-norm update of the last sweep.
    pub final_update: f64,
    /// Max stationary residual of the discretized system at the solution.
    pub final_residual: f64,
    pub dt_final: f64,
    pub dt_reductions: usize,
    /// Max disagreement between the two evaluations of the one-sided
    /// cross-partial stencil at diagonal-boundary points (coefficient
    /// relations vs. raw difference weights). Should be at rounding level.
    pub diag_scheme_mismatch: f64,
}
