//! Three-agent stationary system on the discretized simplex.
//!
//! Boundary data comes first: the three vertices in closed form and the
//! three edges as two-agent economies (with the zero-weight agent riding
//! along). The interior is then integrated to stationarity by the implicit
//! pseudo-time scheme: per-point adjustment/volatility solves on the frozen
//! ratios, nine-point stencil assembly (with the one-sided cross-partial
//! variant on the diagonal boundary), and one block-sparse solve per agent
//! per step.

use rayon::prelude::*;

use crate::edge::{solve_edge, EdgeProblem, EdgeSolution};
use crate::error::{Error, Result};
use crate::fixed_point::{solve_point, PointInputs, PointSolveOptions};
use crate::grid::{EdgeKind, PointClass, SimplexGrid};
use crate::model::{
    market_state, support_value, weight_dynamics, AgentSpec, EconomyParams, StatePoint,
};
use crate::numerics::sparse::{solve_sparse, CsrBuilder, SparseSystem};
use crate::stepping::{PseudoTime, StepVerdict};
use crate::vertex;
use crate::{ConvergenceReport, SolverOptions};

/// Converged fields on the full grid, one entry per grid point.
#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub v: [Vec<f64>; 3],
    pub nu: [Vec<f64>; 3],
    pub sigma: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: Vec<f64>,
    pub report: ConvergenceReport,
    pub edge_reports: Vec<ConvergenceReport>,
}

/// Frozen nodal fields an assembly runs against.
#[derive(Debug, Clone)]
pub struct FrozenFields {
    pub v: [Vec<f64>; 3],
    pub nu: [Vec<f64>; 3],
    pub sigma: Vec<f64>,
}

/// Central differences of one agent's ratio at a solved point; the same
/// operator feeds the point solves, the assembly, and the residual.
fn gradient(grid: &SimplexGrid, field: &[f64], idx: usize) -> [f64; 2] {
    let h = grid.spacing();
    let e = grid.neighbor(idx, 1, 0).expect("stencil neighbor");
    let w = grid.neighbor(idx, -1, 0).expect("stencil neighbor");
    let n = grid.neighbor(idx, 0, 1).expect("stencil neighbor");
    let s = grid.neighbor(idx, 0, -1).expect("stencil neighbor");
    [
        (field[e] - field[w]) / (2.0 * h),
        (field[n] - field[s]) / (2.0 * h),
    ]
}

/// Aggregates at one solved point for given `(nu, sigma)`.
struct PointData {
    nu: [f64; 3],
    sigma: f64,
    theta: f64,
    r: f64,
    kappa: [f64; 3],
    delta: [f64; 3],
    /// Vector drift `mu_w_d omega_d` of the two free coordinates.
    drift: [f64; 2],
    /// Vector diffusion `sigma_w_d omega_d`.
    diff: [f64; 2],
}

fn point_data(
    weights: &[f64],
    nu: [f64; 3],
    sigma: f64,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<PointData> {
    let state = StatePoint::new(&weights[..2])?;
    let ms = market_state(&state, &nu, sigma, agents, params)?;
    let dynamics = weight_dynamics(&ms, agents, params)?;
    let mut delta = [0.0; 3];
    for i in 0..3 {
        delta[i] = support_value(&agents[i], nu[i])?;
    }
    Ok(PointData {
        nu,
        sigma,
        theta: ms.theta,
        r: ms.r,
        kappa: [ms.kappa[0], ms.kappa[1], ms.kappa[2]],
        delta,
        drift: [
            dynamics.mu_w[0] * weights[0],
            dynamics.mu_w[1] * weights[1],
        ],
        diff: [
            dynamics.sigma_w[0] * weights[0],
            dynamics.sigma_w[1] * weights[1],
        ],
    })
}

/// Stencil contribution list of one agent at one solved point:
/// `(dj, dk, coefficient)` triples, diagonal first.
fn stencil(
    data: &PointData,
    agent: &AgentSpec,
    i: usize,
    class: PointClass,
    h: f64,
    inv_dt: f64,
    params: &EconomyParams,
) -> (Vec<(isize, isize, f64)>, f64) {
    let g = agent.gamma;
    let kappa = data.kappa[i];
    let a_zero = ((1.0 - g) * (data.r + data.delta[i]) - params.rho
        + (1.0 - g) / (2.0 * g) * kappa * kappa)
        / g;
    let b1 = (1.0 - g) / g * kappa * data.diff[0] + data.drift[0];
    let b2 = (1.0 - g) / g * kappa * data.diff[1] + data.drift[1];
    let c11 = data.diff[0] * data.diff[0];
    let c22 = data.diff[1] * data.diff[1];
    let cross = data.diff[0] * data.diff[1];
    let h2 = h * h;

    let a1 = a_zero - c11 / h2 - c22 / h2 - inv_dt;
    let a2 = c11 / (2.0 * h2) + b1 / (2.0 * h);
    let a3 = c11 / (2.0 * h2) - b1 / (2.0 * h);
    let a4 = c22 / (2.0 * h2) + b2 / (2.0 * h);
    let a5 = c22 / (2.0 * h2) - b2 / (2.0 * h);
    let a6 = cross / (4.0 * h2);

    let mut entries = vec![(0, 0, a1), (1, 0, a2), (-1, 0, a3)];
    let mut mismatch = 0.0f64;
    match class {
        PointClass::Interior => {
            entries.push((0, 1, a4));
            entries.push((0, -1, a5));
            entries.push((1, 1, a6));
            entries.push((1, -1, -a6));
            entries.push((-1, 1, -a6));
            entries.push((-1, -1, a6));
        }
        PointClass::DiagBoundary => {
            // One-sided cross partial: central in the second coordinate,
            // backward in the first, weights +-1/(2h^2) on (j, k+1),
            // (j-1, k+1), (j, k-1), (j-1, k-1). Written via the coefficient
            // relations, with the raw weights cross-checked.
            let t4 = a4 + 2.0 * a6;
            let t5 = a5 - 2.0 * a6;
            let t6 = 2.0 * a6;
            let t7 = -2.0 * a6;
            let raw = cross / (2.0 * h2);
            mismatch = (t4 - (a4 + raw))
                .abs()
                .max((t5 - (a5 - raw)).abs())
                .max((t6 - raw).abs())
                .max((t7 + raw).abs());
            entries.push((0, 1, t4));
            entries.push((0, -1, t5));
            entries.push((-1, -1, t6));
            entries.push((-1, 1, t7));
        }
        _ => unreachable!("only solved points are assembled"),
    }
    (entries, mismatch)
}

/// Assembles one sparse system per agent over the solved points, with
/// Dirichlet neighbors folded into the right-hand sides. `dt = infinity`
/// yields the stationary operator (zero pseudo-time shift, rhs `-1`).
///
/// Returns the systems and the max disagreement between the two evaluations
/// of the diagonal-boundary cross-partial coefficients.
pub fn assemble(
    grid: &SimplexGrid,
    fields: &FrozenFields,
    dt: f64,
    agents: &[AgentSpec; 3],
    params: &EconomyParams,
) -> Result<(Vec<SparseSystem>, f64)> {
    let h = grid.spacing();
    let inv_dt = if dt.is_finite() { 1.0 / dt } else { 0.0 };
    let mut worst_mismatch = 0.0f64;

    let mut builders: Vec<CsrBuilder> = (0..3).map(|_| CsrBuilder::new()).collect();
    let mut row = Vec::with_capacity(9);
    for &idx in grid.solved_points() {
        let weights = grid.full_weights(idx);
        let nu = [fields.nu[0][idx], fields.nu[1][idx], fields.nu[2][idx]];
        let data = point_data(&weights, nu, fields.sigma[idx], agents, params)?;
        let class = grid.classify(idx);
        for (i, builder) in builders.iter_mut().enumerate() {
            let (entries, mismatch) = stencil(&data, &agents[i], i, class, h, inv_dt, params);
            worst_mismatch = worst_mismatch.max(mismatch);
            let mut rhs = -1.0 - fields.v[i][idx] * inv_dt;
            for (dj, dk, coeff) in entries {
                let nb = grid.neighbor(idx, dj, dk).ok_or(Error::MalformedSparse {
                    reason: format!("stencil exits grid at point {idx}"),
                })?;
                match grid.solved_position(nb) {
                    Some(col) => row.push((col, coeff)),
                    None => rhs -= coeff * fields.v[i][nb],
                }
            }
            builder.push_row(&mut row, rhs);
        }
    }
    let systems = builders.into_iter().map(CsrBuilder::finish).collect();
    Ok((systems, worst_mismatch))
}

fn edge_problem(
    kind: EdgeKind,
    agents: &[AgentSpec; 3],
    p: usize,
    params: &EconomyParams,
    opts: &SolverOptions,
) -> EdgeProblem {
    // Pair order puts the state agent first; the zero-weight agent rides
    // along as a passenger.
    let (pair, passenger) = match kind {
        EdgeKind::Omega2Zero => ([agents[0], agents[2]], agents[1]),
        EdgeKind::Omega1Zero => ([agents[1], agents[2]], agents[0]),
        EdgeKind::Hypotenuse => ([agents[0], agents[1]], agents[2]),
    };
    EdgeProblem {
        pair,
        passengers: vec![passenger],
        p,
        params: *params,
        opts: opts.clone(),
    }
}

/// Local-to-global agent order of each edge solution.
fn edge_agent_map(kind: EdgeKind) -> [usize; 3] {
    match kind {
        EdgeKind::Omega2Zero => [0, 2, 1],
        EdgeKind::Omega1Zero => [1, 2, 0],
        EdgeKind::Hypotenuse => [0, 1, 2],
    }
}

/// Grid point index of edge position `p` on the given edge.
fn edge_grid_index(grid: &SimplexGrid, kind: EdgeKind, p: usize) -> usize {
    let top = grid.k() - 1;
    let (j, k) = match kind {
        EdgeKind::Omega2Zero => (p, 0),
        EdgeKind::Omega1Zero => (0, p),
        EdgeKind::Hypotenuse => (p, top - p),
    };
    grid.index_of(j, k).expect("edge point")
}

fn write_edge_solution(
    grid: &SimplexGrid,
    kind: EdgeKind,
    sol: &EdgeSolution,
    out_v: &mut [Vec<f64>; 3],
    out_nu: &mut [Vec<f64>; 3],
    out_sigma: &mut [f64],
    out_theta: &mut [f64],
    out_r: &mut [f64],
) {
    let map = edge_agent_map(kind);
    for p in 0..sol.n_points() {
        let idx = edge_grid_index(grid, kind, p);
        for local in 0..3 {
            out_v[map[local]][idx] = sol.v[local][p];
            out_nu[map[local]][idx] = sol.nu[local][p];
        }
        out_sigma[idx] = sol.sigma[p];
        out_theta[idx] = sol.theta[p];
        out_r[idx] = sol.r[p];
    }
}

/// Solves the three-agent economy on the simplex grid.
pub fn solve_simplex(
    grid: &SimplexGrid,
    agents: &[AgentSpec; 3],
    params: &EconomyParams,
    opts: &SolverOptions,
) -> Result<SimplexSolution> {
    if grid.n_agents() != 3 {
        return Err(Error::UnsupportedAgentCount {
            n: grid.n_agents(),
        });
    }
    let h = grid.spacing();
    let l = grid.len();
    let p_edge = grid.k() - 1;

    // Boundary sub-problems.
    let kinds = [EdgeKind::Omega2Zero, EdgeKind::Omega1Zero, EdgeKind::Hypotenuse];
    let edge_solutions: Vec<EdgeSolution> = kinds
        .par_iter()
        .map(|kind| solve_edge(&edge_problem(*kind, agents, p_edge, params, opts)))
        .collect::<Result<_>>()?;

    let mut v: [Vec<f64>; 3] = [vec![0.0; l], vec![0.0; l], vec![0.0; l]];
    let mut nu: [Vec<f64>; 3] = [vec![0.0; l], vec![0.0; l], vec![0.0; l]];
    let mut sigma = vec![params.sigma_d; l];
    let mut theta = vec![0.0; l];
    let mut r_field = vec![0.0; l];

    // Interior initialization: the plane through the three vertex values.
    let corner = |j: usize| {
        if opts.force_unconstrained {
            vertex::solve_vertex_unconstrained(j, agents, params)
        } else {
            vertex::solve_vertex(j, agents, params)
        }
    };
    let corners = [corner(0)?, corner(1)?, corner(2)?];
    for idx in 0..l {
        let w = grid.full_weights(idx);
        for i in 0..3 {
            v[i][idx] = w[0] * corners[0].v[i] + w[1] * corners[1].v[i] + w[2] * corners[2].v[i];
        }
    }
    for (kind, sol) in kinds.iter().zip(&edge_solutions) {
        write_edge_solution(
            grid, *kind, sol, &mut v, &mut nu, &mut sigma, &mut theta, &mut r_field,
        );
    }

    let solved = grid.solved_points().to_vec();
    let n_solved = solved.len();
    let point_opts = PointSolveOptions {
        tol: opts.tol_point,
        force_unconstrained: opts.force_unconstrained,
        ..Default::default()
    };

    let mut warm_nu: Vec<[f64; 3]> = vec![[0.0; 3]; n_solved];
    let mut warm_sigma: Vec<f64> = vec![params.sigma_d; n_solved];

    // One Picard sweep of the per-point nonlinear solves.
    let point_sweep = |v: &[Vec<f64>; 3],
                       warm_nu: &[[f64; 3]],
                       warm_sigma: &[f64]|
     -> Result<Vec<PointData>> {
        solved
            .par_iter()
            .enumerate()
            .map(|(rr, &idx)| -> Result<PointData> {
                let weights = grid.full_weights(idx);
                let vals = [v[0][idx], v[1][idx], v[2][idx]];
                let g0 = gradient(grid, &v[0], idx);
                let g1 = gradient(grid, &v[1], idx);
                let g2 = gradient(grid, &v[2], idx);
                let grads = [g0[0], g0[1], g1[0], g1[1], g2[0], g2[1]];
                let s = weights[0] * vals[0] + weights[1] * vals[1] + weights[2] * vals[2];
                let inputs = PointInputs {
                    weights: &weights,
                    v: &vals,
                    grad_v: &grads,
                    s,
                    agents,
                    params,
                };
                let sol = solve_point(&inputs, Some((&warm_nu[rr], warm_sigma[rr])), &point_opts)
                    .map_err(|e| Error::PointSolve {
                        location: format!(
                            "simplex point (omega1, omega2) = ({:.6}, {:.6})",
                            weights[0], weights[1]
                        ),
                        source: Box::new(e),
                    })?;
                point_data(
                    &weights,
                    [sol.nu[0], sol.nu[1], sol.nu[2]],
                    sol.sigma,
                    agents,
                    params,
                )
            })
            .collect()
    };

    let mut clock = PseudoTime::new(opts.dt_init);
    let mut steps = 0;
    let mut update = f64::INFINITY;
    let mut converged = false;
    let mut diag_mismatch = 0.0f64;
    while steps < opts.max_steps {
        steps += 1;
        let data = point_sweep(&v, &warm_nu, &warm_sigma)?;
        for (rr, d) in data.iter().enumerate() {
            let idx = solved[rr];
            for i in 0..3 {
                nu[i][idx] = d.nu[i];
            }
            sigma[idx] = d.sigma;
        }
        let frozen = FrozenFields {
            v: v.clone(),
            nu: nu.clone(),
            sigma: sigma.clone(),
        };
        let (systems, mismatch) = assemble(grid, &frozen, clock.dt, agents, params)?;
        diag_mismatch = diag_mismatch.max(mismatch);
        let solutions: Vec<Vec<f64>> = systems
            .par_iter()
            .map(solve_sparse)
            .collect::<Result<_>>()?;

        let mut u = 0.0f64;
        for i in 0..3 {
            for (rr, &idx) in solved.iter().enumerate() {
                u = u.max((solutions[i][rr] - v[i][idx]).abs());
            }
        }
        match clock.observe(u) {
            StepVerdict::Reject => continue,
            StepVerdict::Continue => {}
        }
        let relax = opts.relaxation.clamp(1e-3, 1.0);
        for i in 0..3 {
            for (rr, &idx) in solved.iter().enumerate() {
                v[i][idx] = (1.0 - relax) * v[i][idx] + relax * solutions[i][rr];
            }
        }
        for (rr, d) in data.iter().enumerate() {
            warm_nu[rr] = d.nu;
            warm_sigma[rr] = d.sigma;
        }
        update = u * relax;
        if clock.converged(update, opts.tol_outer) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::MaxSteps {
            max_steps: opts.max_steps,
            update,
            dt: clock.dt,
        });
    }

    // Refresh point fields against the converged ratios.
    let data = point_sweep(&v, &warm_nu, &warm_sigma)?;
    for (rr, d) in data.iter().enumerate() {
        let idx = solved[rr];
        for i in 0..3 {
            nu[i][idx] = d.nu[i];
        }
        sigma[idx] = d.sigma;
        theta[idx] = d.theta;
        r_field[idx] = d.r;
    }

    let mut solution = SimplexSolution {
        v,
        nu,
        sigma,
        theta,
        r: r_field,
        report: ConvergenceReport {
            converged: true,
            steps,
            final_update: update,
            final_residual: 0.0,
            dt_final: clock.dt,
            dt_reductions: clock.reductions,
            diag_scheme_mismatch: diag_mismatch,
        },
        edge_reports: edge_solutions.iter().map(|s| s.report.clone()).collect(),
    };
    solution.report.final_residual = pde_residual(grid, &solution, agents, params)?;
    Ok(solution)
}

/// Max stationary residual over solved points and agents, evaluated with
/// the same stencils as the assembly (no pseudo-time shift).
pub fn pde_residual(
    grid: &SimplexGrid,
    solution: &SimplexSolution,
    agents: &[AgentSpec; 3],
    params: &EconomyParams,
) -> Result<f64> {
    let frozen = FrozenFields {
        v: solution.v.clone(),
        nu: solution.nu.clone(),
        sigma: solution.sigma.clone(),
    };
    let (systems, _) = assemble(grid, &frozen, f64::INFINITY, agents, params)?;
    let mut worst = 0.0f64;
    for (i, sys) in systems.iter().enumerate() {
        let x: Vec<f64> = grid
            .solved_points()
            .iter()
            .map(|&idx| solution.v[i][idx])
            .collect();
        for (ax, b) in sys.matvec(&x).iter().zip(&sys.rhs) {
            worst = worst.max((ax - b).abs());
        }
    }
    Ok(worst)
}
