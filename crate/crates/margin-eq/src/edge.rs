//! Two-agent stationary system on an interval, solved by implicit
//! pseudo-time stepping with Picard-frozen coefficients and tridiagonal
//! solves.
//!
//! The state is the first agent's consumption weight `omega in [0, 1]`;
//! endpoints carry the closed-form vertex data. This both is the standalone
//! two-agent solver and produces the boundary data for each edge of the
//! three-agent simplex, where the zero-weight agents ride along as
//! passengers: their ratios satisfy the same equation driven by the pair's
//! aggregates, without feeding back into them.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fixed_point::{solve_point, PointInputs, PointSolveOptions};
use crate::model::{
    market_state, support_value, weight_dynamics, AgentSpec, EconomyParams, StatePoint,
};
use crate::numerics::tridiag::{solve_tridiagonal, TriDiagonalSystem};
use crate::stepping::{PseudoTime, StepVerdict};
use crate::vertex;
use crate::{ConvergenceReport, SolverOptions};

#[derive(Debug, Clone)]
pub struct EdgeProblem {
    /// The two agents with nonzero weight; the state is `pair[0]`'s weight.
    pub pair: [AgentSpec; 2],
    /// Zero-weight agents whose ratios are still needed (simplex edges).
    pub passengers: Vec<AgentSpec>,
    /// Number of grid intervals; the grid has `p + 1` points.
    pub p: usize,
    pub params: EconomyParams,
    pub opts: SolverOptions,
}

/// Converged per-point fields, agents ordered `[pair[0], pair[1],
/// passengers...]`.
#[derive(Debug, Clone)]
pub struct EdgeSolution {
    pub omega: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub theta: Vec<f64>,
    pub r: Vec<f64>,
    pub report: ConvergenceReport,
}

impl EdgeSolution {
    pub fn n_points(&self) -> usize {
        self.omega.len()
    }

    pub fn n_agents(&self) -> usize {
        self.v.len()
    }
}

/// Aggregate fields of the pair economy at one interior point.
#[derive(Debug, Clone)]
struct PointFields {
    nu: [f64; 2],
    sigma: f64,
    theta: f64,
    r: f64,
    /// Vector drift of the state coordinate, `mu_w omega`.
    drift: f64,
    /// Vector diffusion of the state coordinate, `sigma_w omega`.
    diff: f64,
    kappa: [f64; 2],
}

fn point_fields(
    omega: f64,
    nu: [f64; 2],
    sigma: f64,
    pair: &[AgentSpec],
    params: &EconomyParams,
) -> Result<PointFields> {
    let state = StatePoint::new(&[omega])?;
    let ms = market_state(&state, &nu, sigma, pair, params)?;
    let dynamics = weight_dynamics(&ms, pair, params)?;
    Ok(PointFields {
        nu,
        sigma,
        theta: ms.theta,
        r: ms.r,
        drift: dynamics.mu_w[0] * omega,
        diff: dynamics.sigma_w[0] * omega,
        kappa: [ms.kappa[0], ms.kappa[1]],
    })
}

/// Zeroth/first/second-order ODE coefficients for one agent at one point.
fn ode_coeffs(
    agent: &AgentSpec,
    nu_i: f64,
    kappa_i: f64,
    fields: &PointFields,
    params: &EconomyParams,
) -> Result<(f64, f64, f64)> {
    let g = agent.gamma;
    let delta = support_value(agent, nu_i)?;
    let a = ((1.0 - g) * (fields.r + delta) - params.rho
        + (1.0 - g) / (2.0 * g) * kappa_i * kappa_i)
        / g;
    let b = (1.0 - g) / g * kappa_i * fields.diff + fields.drift;
    let c = 0.5 * fields.diff * fields.diff;
    Ok((a, b, c))
}

/// One implicit pseudo-time step for one agent: tridiagonal solve over the
/// interior with Dirichlet ends folded into the right-hand side.
fn implicit_sweep(
    v_cur: &[f64],
    coeffs: &[(f64, f64, f64)],
    h: f64,
    dt: f64,
    v_left: f64,
    v_right: f64,
) -> Result<Vec<f64>> {
    let n = coeffs.len();
    let mut lower = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    let h2 = h * h;
    for (i, &(a, b, c)) in coeffs.iter().enumerate() {
        let lo = c / h2 - b / (2.0 * h);
        let di = a - 2.0 * c / h2 - 1.0 / dt;
        let up = c / h2 + b / (2.0 * h);
        diag[i] = di;
        rhs[i] = -1.0 - v_cur[i + 1] / dt;
        if i == 0 {
            rhs[i] -= lo * v_left;
        } else {
            lower[i - 1] = lo;
        }
        if i == n - 1 {
            rhs[i] -= up * v_right;
        } else {
            upper[i] = up;
        }
    }
    let sys = TriDiagonalSystem::new(lower, diag, upper, rhs)?;
    solve_tridiagonal(&sys)
}

/// Stationary residual `a V + b V' + c V'' + 1` with central differences,
/// max over interior points.
fn stationary_residual(v: &[f64], coeffs: &[(f64, f64, f64)], h: f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, &(a, b, c)) in coeffs.iter().enumerate() {
        let p = i + 1;
        let d1 = (v[p + 1] - v[p - 1]) / (2.0 * h);
        let d2 = (v[p + 1] - 2.0 * v[p] + v[p - 1]) / (h * h);
        worst = worst.max((a * v[p] + b * d1 + c * d2 + 1.0).abs());
    }
    worst
}

struct PairSweep {
    fields: Vec<PointFields>,
    v_new: [Vec<f64>; 2],
}

/// Solves the two-agent economy plus passengers on the edge.
pub fn solve_edge(problem: &EdgeProblem) -> Result<EdgeSolution> {
    let EdgeProblem {
        pair,
        passengers,
        p,
        params,
        opts,
    } = problem;
    let p = *p;
    if p < 4 {
        return Err(Error::GridTooCoarse { k: p, min: 4 });
    }
    let h = 1.0 / p as f64;
    let omega: Vec<f64> = (0..=p).map(|i| i as f64 * h).collect();

    let all_agents: Vec<AgentSpec> = pair
        .iter()
        .copied()
        .chain(passengers.iter().copied())
        .collect();
    let n_all = all_agents.len();

    // Vertex data: pair[0] dominates at omega = 1, pair[1] at omega = 0.
    let solve_corner = |j: usize| {
        if opts.force_unconstrained {
            vertex::solve_vertex_unconstrained(j, &all_agents, params)
        } else {
            vertex::solve_vertex(j, &all_agents, params)
        }
    };
    let vert_right = solve_corner(0)?;
    let vert_left = solve_corner(1)?;

    let mut v: [Vec<f64>; 2] = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for i in 0..2 {
        for (pt, w) in omega.iter().enumerate() {
            v[i][pt] = (1.0 - w) * vert_left.v[i] + w * vert_right.v[i];
        }
    }

    let point_opts = PointSolveOptions {
        tol: opts.tol_point,
        force_unconstrained: opts.force_unconstrained,
        ..Default::default()
    };

    // Warm starts for the per-point solves.
    let mut warm_nu = vec![[0.0f64; 2]; p + 1];
    let mut warm_sigma = vec![params.sigma_d; p + 1];

    let sweep = |v: &[Vec<f64>; 2],
                 warm_nu: &[[f64; 2]],
                 warm_sigma: &[f64],
                 _dt: f64|
     -> Result<Vec<PointFields>> {
        (1..p)
            .into_par_iter()
            .map(|pt| -> Result<PointFields> {
                let w = omega[pt];
                let weights = [w, 1.0 - w];
                let vals = [v[0][pt], v[1][pt]];
                let grads = [
                    (v[0][pt + 1] - v[0][pt - 1]) / (2.0 * h),
                    (v[1][pt + 1] - v[1][pt - 1]) / (2.0 * h),
                ];
                let s = w * vals[0] + (1.0 - w) * vals[1];
                let inputs = PointInputs {
                    weights: &weights,
                    v: &vals,
                    grad_v: &grads,
                    s,
                    agents: pair,
                    params,
                };
                let sol = solve_point(&inputs, Some((&warm_nu[pt], warm_sigma[pt])), &point_opts)
                    .map_err(|e| Error::PointSolve {
                        location: format!("edge point omega = {w:.6}"),
                        source: Box::new(e),
                    })?;
                point_fields(w, [sol.nu[0], sol.nu[1]], sol.sigma, pair, params)
            })
            .collect()
    };

    let advance = |v: &[Vec<f64>; 2], fields: &[PointFields], dt: f64| -> Result<PairSweep> {
        let mut v_new: [Vec<f64>; 2] = [v[0].clone(), v[1].clone()];
        for i in 0..2 {
            let coeffs: Vec<(f64, f64, f64)> = fields
                .iter()
                .map(|f| ode_coeffs(&pair[i], f.nu[i], f.kappa[i], f, params))
                .collect::<Result<_>>()?;
            let interior = implicit_sweep(&v[i], &coeffs, h, dt, v[i][0], v[i][p])?;
            v_new[i][1..p].copy_from_slice(&interior);
        }
        Ok(PairSweep {
            fields: fields.to_vec(),
            v_new,
        })
    };

    let mut clock = PseudoTime::new(opts.dt_init);
    let mut update = f64::INFINITY;
    let mut steps = 0;
    let mut converged = false;
    while steps < opts.max_steps {
        steps += 1;
        let fields = sweep(&v, &warm_nu, &warm_sigma, clock.dt)?;
        let result = advance(&v, &fields, clock.dt)?;
        let mut u = 0.0f64;
        for i in 0..2 {
            for pt in 1..p {
                u = u.max((result.v_new[i][pt] - v[i][pt]).abs());
            }
        }
        match clock.observe(u) {
            StepVerdict::Reject => continue,
            StepVerdict::Continue => {}
        }
        let relax = opts.relaxation.clamp(1e-3, 1.0);
        for i in 0..2 {
            for pt in 1..p {
                v[i][pt] = (1.0 - relax) * v[i][pt] + relax * result.v_new[i][pt];
            }
        }
        for (pt, f) in result.fields.iter().enumerate() {
            warm_nu[pt + 1] = f.nu;
            warm_sigma[pt + 1] = f.sigma;
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

    // Refresh the point fields against the converged ratios so exported
    // aggregates are consistent with V.
    let fields = sweep(&v, &warm_nu, &warm_sigma, clock.dt)?;

    // Stationary residual of the pair system.
    let mut residual = 0.0f64;
    for i in 0..2 {
        let coeffs: Vec<(f64, f64, f64)> = fields
            .iter()
            .map(|f| ode_coeffs(&pair[i], f.nu[i], f.kappa[i], f, params))
            .collect::<Result<_>>()?;
        residual = residual.max(stationary_residual(&v[i], &coeffs, h));
    }

    // Assemble full-length output fields.
    let mut v_all: Vec<Vec<f64>> = vec![vec![0.0; p + 1]; n_all];
    let mut nu_all: Vec<Vec<f64>> = vec![vec![0.0; p + 1]; n_all];
    let mut sigma_out = vec![params.sigma_d; p + 1];
    let mut theta_out = vec![0.0; p + 1];
    let mut r_out = vec![0.0; p + 1];
    for i in 0..2 {
        v_all[i].copy_from_slice(&v[i]);
    }
    for pt in 1..p {
        let f = &fields[pt - 1];
        sigma_out[pt] = f.sigma;
        theta_out[pt] = f.theta;
        r_out[pt] = f.r;
        nu_all[0][pt] = f.nu[0];
        nu_all[1][pt] = f.nu[1];
    }
    let nu_left = vert_left.nu.clone();
    let nu_right = vert_right.nu.clone();
    theta_out[0] = vert_left.theta;
    r_out[0] = vert_left.r;
    theta_out[p] = vert_right.theta;
    r_out[p] = vert_right.r;
    for i in 0..n_all {
        nu_all[i][0] = nu_left[i];
        nu_all[i][p] = nu_right[i];
    }

    // Passengers: same equation, aggregates frozen at the pair solution.
    let mut max_pass_residual = 0.0f64;
    for (ci, agent) in passengers.iter().enumerate() {
        let idx = 2 + ci;
        let (vp, nup, res) = solve_passenger(
            agent,
            &omega,
            &fields,
            vert_left.v[idx],
            vert_right.v[idx],
            params,
            opts,
        )?;
        v_all[idx] = vp;
        nu_all[idx][1..p].copy_from_slice(&nup);
        nu_all[idx][0] = nu_left[idx];
        nu_all[idx][p] = nu_right[idx];
        max_pass_residual = max_pass_residual.max(res);
    }

    Ok(EdgeSolution {
        omega,
        v: v_all,
        nu: nu_all,
        sigma: sigma_out,
        theta: theta_out,
        r: r_out,
        report: ConvergenceReport {
            converged: true,
            steps,
            final_update: update,
            final_residual: residual.max(max_pass_residual),
            dt_final: clock.dt,
            dt_reductions: clock.reductions,
            diag_scheme_mismatch: 0.0,
        },
    })
}

/// Solves one zero-weight agent's equation against frozen aggregates. Its
/// adjustment is an explicit negative-part formula because the aggregates
/// no longer depend on it.
fn solve_passenger(
    agent: &AgentSpec,
    omega: &[f64],
    fields: &[PointFields],
    v_left: f64,
    v_right: f64,
    params: &EconomyParams,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let p = omega.len() - 1;
    let h = 1.0 / p as f64;
    let mut v: Vec<f64> = omega
        .iter()
        .map(|w| (1.0 - w) * v_left + w * v_right)
        .collect();
    let mut nu = vec![0.0; p - 1];

    let passenger_nu = |sigma: f64, theta: f64, diff: f64, dv: f64, val: f64| -> f64 {
        if opts.force_unconstrained {
            return 0.0;
        }
        match agent.margin {
            crate::model::Margin::Unconstrained => 0.0,
            crate::model::Margin::Cap(m) => {
                let g = agent.gamma;
                (m * g * sigma * sigma * (1.0 - (theta / g + diff * dv / val) / (m * sigma)))
                    .min(0.0)
            }
        }
    };

    let mut clock = PseudoTime::new(opts.dt_init);
    let mut converged = false;
    for _ in 0..opts.max_steps {
        let coeffs: Vec<(f64, f64, f64)> = (1..p)
            .map(|pt| {
                let f = &fields[pt - 1];
                let dv = (v[pt + 1] - v[pt - 1]) / (2.0 * h);
                let nv = passenger_nu(f.sigma, f.theta, f.diff, dv, v[pt]);
                nu[pt - 1] = nv;
                let kappa = f.theta + nv / f.sigma;
                ode_coeffs(agent, nv, kappa, f, params)
            })
            .collect::<Result<_>>()?;
        let interior = implicit_sweep(&v, &coeffs, h, clock.dt, v[0], v[p])?;
        let mut u = 0.0f64;
        for pt in 1..p {
            u = u.max((interior[pt - 1] - v[pt]).abs());
        }
        match clock.observe(u) {
            StepVerdict::Reject => continue,
            StepVerdict::Continue => {}
        }
        v[1..p].copy_from_slice(&interior);
        if clock.converged(u, opts.tol_outer) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::MaxSteps {
            max_steps: opts.max_steps,
            update: f64::NAN,
            dt: clock.dt,
        });
    }
    let coeffs: Vec<(f64, f64, f64)> = (1..p)
        .map(|pt| {
            let f = &fields[pt - 1];
            let dv = (v[pt + 1] - v[pt - 1]) / (2.0 * h);
            let nv = passenger_nu(f.sigma, f.theta, f.diff, dv, v[pt]);
            nu[pt - 1] = nv;
            let kappa = f.theta + nv / f.sigma;
            ode_coeffs(agent, nv, kappa, f, params)
        })
        .collect::<Result<_>>()?;
    let residual = stationary_residual(&v, &coeffs, h);
    Ok((v, nu, residual))
}

/// Max stationary residual of a converged edge solution, recomputed from
/// the stored fields for all agents (pair and passengers).
pub fn edge_residual(
    solution: &EdgeSolution,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<f64> {
    let p = solution.n_points() - 1;
    let h = 1.0 / p as f64;
    let mut worst = 0.0f64;
    for pt in 1..p {
        let w = solution.omega[pt];
        let nu_pair = [solution.nu[0][pt], solution.nu[1][pt]];
        let fields = point_fields(w, nu_pair, solution.sigma[pt], &agents[..2], params)?;
        for (i, agent) in agents.iter().enumerate() {
            let nu_i = solution.nu[i][pt];
            let kappa_i = fields.theta + nu_i / fields.sigma;
            let (a, b, c) = ode_coeffs(agent, nu_i, kappa_i, &fields, params)?;
            let v = &solution.v[i];
            let d1 = (v[pt + 1] - v[pt - 1]) / (2.0 * h);
            let d2 = (v[pt + 1] - 2.0 * v[pt] + v[pt - 1]) / (h * h);
            worst = worst.max((a * v[pt] + b * d1 + c * d2 + 1.0).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick_opts() -> SolverOptions {
        SolverOptions {
            tol_outer: 1e-9,
            ..Default::default()
        }
    }

    #[test]
    fn homogeneous_pair_is_constant_at_vertex_value() {
        let params = EconomyParams::baseline();
        let pair = [
            AgentSpec::constrained(2.0, 1.2).unwrap(),
            AgentSpec::constrained(2.0, 1.2).unwrap(),
        ];
        let problem = EdgeProblem {
            pair,
            passengers: vec![],
            p: 20,
            params,
            opts: quick_opts(),
        };
        let sol = solve_edge(&problem).unwrap();
        let v_star = vertex::vertex_v(0, 0, &pair, &params).unwrap();
        for pt in 0..=20 {
            assert_abs_diff_eq!(sol.v[0][pt], v_star, epsilon = 1e-8);
            assert_abs_diff_eq!(sol.v[1][pt], v_star, epsilon = 1e-8);
            assert_abs_diff_eq!(sol.sigma[pt], params.sigma_d, epsilon = 1e-9);
            assert_eq!(sol.nu[0][pt], 0.0);
        }
        assert!(sol.report.steps < 300, "took {} steps", sol.report.steps);
        assert!(sol.report.final_residual < 1e-10);
    }

    #[test]
    fn endpoints_carry_vertex_data() {
        let params = EconomyParams::baseline();
        let pair = [
            AgentSpec::constrained(1.1, 1.2).unwrap(),
            AgentSpec::constrained(5.0, 1.2).unwrap(),
        ];
        let problem = EdgeProblem {
            pair,
            passengers: vec![],
            p: 24,
            params,
            opts: quick_opts(),
        };
        let sol = solve_edge(&problem).unwrap();
        let left = vertex::solve_vertex(1, &pair, &params).unwrap();
        let right = vertex::solve_vertex(0, &pair, &params).unwrap();
        assert_abs_diff_eq!(sol.v[0][0], left.v[0], epsilon = 1e-14);
        assert_abs_diff_eq!(sol.v[1][0], left.v[1], epsilon = 1e-14);
        assert_abs_diff_eq!(sol.v[0][24], right.v[0], epsilon = 1e-14);
        assert_abs_diff_eq!(sol.theta[0], left.theta, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.theta[24], right.theta, epsilon = 1e-14);
        // Interior limits continuously to the vertex data; the ratio is
        // steep but not discontinuous next to the corner.
        assert!((sol.v[0][1] - left.v[0]).abs() < 3.0);
        assert!((sol.v[1][1] - left.v[1]).abs() < 3.0);

        // The binding region exists at low omega_1 and there nu_0 < 0.
        assert!(sol.nu[0][1] < -1e-6, "nu near omega=0: {}", sol.nu[0][1]);
        // Far side is unconstrained.
        assert_eq!(sol.nu[0][23], 0.0);
        assert!(sol.report.final_residual < 1e-5);
    }

    /// The gap between the vertex and the first interior point vanishes
    /// under refinement (the limit is the vertex datum).
    #[test]
    fn boundary_gap_shrinks_with_refinement() {
        let params = EconomyParams::baseline();
        let pair = [
            AgentSpec::constrained(1.1, 1.2).unwrap(),
            AgentSpec::constrained(5.0, 1.2).unwrap(),
        ];
        let gap_at = |p: usize| {
            let problem = EdgeProblem {
                pair,
                passengers: vec![],
                p,
                params,
                opts: quick_opts(),
            };
            let sol = solve_edge(&problem).unwrap();
            (sol.v[1][1] - sol.v[1][0]).abs()
        };
        let coarse = gap_at(16);
        let fine = gap_at(64);
        assert!(
            fine < coarse / 1.3,
            "gap did not shrink: coarse {coarse}, fine {fine}"
        );
    }

    #[test]
    fn benchmark_run_forces_zero_adjustments() {
        let params = EconomyParams::baseline();
        let pair = [
            AgentSpec::constrained(1.1, 1.2).unwrap(),
            AgentSpec::constrained(5.0, 1.2).unwrap(),
        ];
        let problem = EdgeProblem {
            pair,
            passengers: vec![],
            p: 16,
            params,
            opts: SolverOptions {
                force_unconstrained: true,
                ..quick_opts()
            },
        };
        let sol = solve_edge(&problem).unwrap();
        for pt in 0..=16 {
            assert_eq!(sol.nu[0][pt], 0.0);
            assert_eq!(sol.nu[1][pt], 0.0);
        }
    }

    #[test]
    fn passenger_rides_along() {
        let params = EconomyParams::baseline();
        let pair = [
            AgentSpec::constrained(1.1, 1.2).unwrap(),
            AgentSpec::constrained(5.0, 1.2).unwrap(),
        ];
        let passenger = AgentSpec::constrained(1.5, 1.2).unwrap();
        let problem = EdgeProblem {
            pair,
            passengers: vec![passenger],
            p: 16,
            params,
            opts: quick_opts(),
        };
        let sol = solve_edge(&problem).unwrap();
        assert_eq!(sol.n_agents(), 3);
        let all = [pair[0], pair[1], passenger];
        let left = vertex::solve_vertex(1, &all, &params).unwrap();
        assert_abs_diff_eq!(sol.v[2][0], left.v[2], epsilon = 1e-14);
        assert!(sol.v[2].iter().all(|v| *v > 0.0));
        let res = edge_residual(&sol, &all, &params).unwrap();
        assert!(res < 1e-5, "residual {res}");
    }
}
