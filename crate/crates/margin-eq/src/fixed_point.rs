//! Per-grid-point solution of the coupled adjustment/volatility system.
//!
//! Given frozen wealth/consumption ratios, their gradients, and the
//! price/dividend ratio at one state point, the adjustments `nu_i` and the
//! stock diffusion `sigma` solve `N + 1` simultaneous equations: each
//! constrained agent's adjustment is the negative part of the value pinning
//! its portfolio at the cap, and `sigma` satisfies the volatility identity.
//! The market price of risk is recomputed from the candidate `(nu, sigma)`
//! on every residual evaluation, so the whole system is self-consistent.
//!
//! The `min{0, .}` kink is handled by an active-set outer loop: guess which
//! constraints bind, solve the then-smooth system with the damped-Newton /
//! dogleg kernel, and verify the sign conditions. With at most three agents
//! the candidate sets are cheap to enumerate in warm-start order.

use crate::error::{Error, Result};
use crate::model::{AgentSpec, EconomyParams, Margin};
use crate::numerics::root::{find_root, RootOptions, RootProblem};

/// Frozen per-point data the nonlinear system is solved against.
#[derive(Debug, Clone, Copy)]
pub struct PointInputs<'a> {
    /// Full weight vector, length `n`, summing to one.
    pub weights: &'a [f64],
    /// Wealth/consumption ratio of each agent, `> 0`.
    pub v: &'a [f64],
    /// Gradient of each agent's ratio, row-major `n x (n-1)`.
    pub grad_v: &'a [f64],
    /// Price/dividend ratio `sum_i w_i V_i` of the frozen field.
    pub s: f64,
    pub agents: &'a [AgentSpec],
    pub params: &'a EconomyParams,
}

impl<'a> PointInputs<'a> {
    fn n(&self) -> usize {
        self.agents.len()
    }

    fn grad(&self, agent: usize, dir: usize) -> f64 {
        self.grad_v[agent * (self.n() - 1) + dir]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PointSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Complete-market benchmark: pin every adjustment at zero.
    pub force_unconstrained: bool,
}

impl Default for PointSolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 120,
            force_unconstrained: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointSolution {
    pub nu: Vec<f64>,
    pub sigma: f64,
    /// Which agents' margin constraints bind.
    pub active: Vec<bool>,
}

/// Market quantities implied by a candidate `(nu, sigma)` at frozen fields.
struct Implied {
    theta: f64,
    /// Directional derivative `sigma_omega . grad V_i` per agent.
    g: Vec<f64>,
    /// Volatility identity right-hand side `sigma_D + (.)/S`.
    sigma_rhs: f64,
}

fn implied(inputs: &PointInputs, nu: &[f64], sigma_eff: f64) -> Implied {
    let n = inputs.n();
    let params = inputs.params;
    let mut xi = 0.0;
    let mut big_xi = 0.0;
    for i in 0..n {
        let w = inputs.weights[i];
        let g = inputs.agents[i].gamma;
        xi += w / g;
        big_xi += w * nu[i] / g;
    }
    let theta = (params.sigma_d - big_xi / sigma_eff) / xi;

    // Diffusion loading of each free coordinate: sigma_w_d * omega_d.
    let mut load = vec![0.0; n - 1];
    for (d, l) in load.iter_mut().enumerate() {
        let kappa = theta + nu[d] / sigma_eff;
        let sig_w = kappa / inputs.agents[d].gamma - params.sigma_d;
        *l = sig_w * inputs.weights[d];
    }

    let mut g_dir = vec![0.0; n];
    for (i, gd) in g_dir.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (d, l) in load.iter().enumerate() {
            acc += l * inputs.grad(i, d);
        }
        *gd = acc;
    }

    // sigma = sigma_D + sum_d load_d [ (J_V^T W)_d + V_d - V_n ] / S.
    let mut num = 0.0;
    for (d, l) in load.iter().enumerate() {
        let mut jv = 0.0;
        for i in 0..n {
            jv += inputs.weights[i] * inputs.grad(i, d);
        }
        num += l * (jv + inputs.v[d] - inputs.v[n - 1]);
    }
    Implied {
        theta,
        g: g_dir,
        sigma_rhs: params.sigma_d + num / inputs.s,
    }
}

/// Portfolio weight of agent `i` implied by `(nu, sigma)`.
fn portfolio(inputs: &PointInputs, imp: &Implied, nu_i: f64, sigma: f64, i: usize) -> f64 {
    let g = inputs.agents[i].gamma;
    (imp.theta + nu_i / sigma + g * imp.g[i] / inputs.v[i]) / (g * sigma)
}

fn volatility_floor(params: &EconomyParams) -> f64 {
    0.1 * params.sigma_d
}

/// Residual of the literal system: `nu_i - min{0, m gamma_i sigma^2 (1 -
/// (theta/gamma_i + sigma_w . grad V_i / V_i)/(m sigma))}` per agent and the
/// volatility identity. Used by tests and post-solve verification.
pub fn min_form_residual(inputs: &PointInputs, nu: &[f64], sigma: f64) -> Vec<f64> {
    let n = inputs.n();
    let sigma_eff = sigma.max(volatility_floor(inputs.params));
    let imp = implied(inputs, nu, sigma_eff);
    let mut out = vec![0.0; n + 1];
    for i in 0..n {
        match inputs.agents[i].margin {
            Margin::Unconstrained => out[i] = nu[i],
            Margin::Cap(m) => {
                let g = inputs.agents[i].gamma;
                let expr = m
                    * g
                    * sigma_eff
                    * sigma_eff
                    * (1.0 - (imp.theta / g + imp.g[i] / inputs.v[i]) / (m * sigma_eff));
                out[i] = nu[i] - expr.min(0.0);
            }
        }
    }
    out[n] = sigma - imp.sigma_rhs;
    out
}

fn candidate_sets(eligible: &[usize], warm: &[bool], n: usize) -> Vec<Vec<bool>> {
    let mut sets = Vec::new();
    sets.push(warm.to_vec());
    let m = eligible.len();
    let mut subsets: Vec<Vec<bool>> = (0..(1usize << m))
        .map(|bits| {
            let mut mask = vec![false; n];
            for (b, &agent) in eligible.iter().enumerate() {
                if bits & (1 << b) != 0 {
                    mask[agent] = true;
                }
            }
            mask
        })
        .collect();
    subsets.sort_by_key(|mask| mask.iter().filter(|&&b| b).count());
    for mask in subsets {
        if mask != sets[0] {
            sets.push(mask);
        }
    }
    sets
}

/// Solves the smooth system for one candidate active set. Unknowns are the
/// active agents' adjustments plus `sigma`; residuals are expressed in
/// portfolio units so the tolerance transfers directly to the slackness
/// bounds downstream.
fn solve_for_set(
    inputs: &PointInputs,
    active: &[bool],
    nu0: &[f64],
    sigma0: f64,
    opts: &PointSolveOptions,
) -> Result<(Vec<f64>, f64)> {
    let n = inputs.n();
    let active_idx: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let dim = active_idx.len() + 1;
    let floor = volatility_floor(inputs.params);

    let mut guess = Vec::with_capacity(dim);
    for &i in &active_idx {
        guess.push(nu0[i].min(0.0));
    }
    guess.push(sigma0.max(floor * 1.5));

    let mut nu_buf = vec![0.0; n];
    let residual = |z: &[f64], out: &mut [f64]| {
        let sigma_raw = z[dim - 1];
        let sigma_eff = sigma_raw.max(floor);
        nu_buf.iter_mut().for_each(|v| *v = 0.0);
        for (slot, &i) in active_idx.iter().enumerate() {
            nu_buf[i] = z[slot];
        }
        let imp = implied(inputs, &nu_buf, sigma_eff);
        for (slot, &i) in active_idx.iter().enumerate() {
            let m = inputs.agents[i]
                .margin
                .cap()
                .expect("active agents carry finite margins");
            out[slot] = portfolio(inputs, &imp, nu_buf[i], sigma_eff, i) - m;
        }
        out[dim - 1] = sigma_raw - imp.sigma_rhs;
    };

    let z = find_root(RootProblem {
        residual,
        guess,
        options: RootOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            ..Default::default()
        },
    })?;

    let sigma = z[dim - 1];
    if sigma <= floor * (1.0 + 1e-9) {
        return Err(Error::VolatilityFloor { floor });
    }
    let mut nu = vec![0.0; n];
    for (slot, &i) in active_idx.iter().enumerate() {
        nu[i] = z[slot];
    }
    Ok((nu, sigma))
}

/// Active-set enumeration around the smooth solves.
///
/// Verification admits an active adjustment up to `+1e-12` (clamped to zero
/// on return) and an inactive portfolio up to `m + 1e-9`; a candidate
/// violating either is discarded and the next set is tried.
pub fn active_set_solve(
    inputs: &PointInputs,
    guess: Option<(&[f64], f64)>,
    opts: &PointSolveOptions,
) -> Result<PointSolution> {
    let n = inputs.n();
    debug_assert!(inputs.v.iter().all(|v| *v > 0.0), "V must be positive");
    debug_assert!(inputs.s > 0.0);

    let params = inputs.params;
    let (nu0, sigma0): (Vec<f64>, f64) = match guess {
        Some((nu, sigma)) => (nu.to_vec(), sigma),
        None => (vec![0.0; n], params.sigma_d),
    };

    let eligible: Vec<usize> = if opts.force_unconstrained {
        Vec::new()
    } else {
        (0..n)
            .filter(|&i| inputs.agents[i].margin.is_finite())
            .collect()
    };
    let warm: Vec<bool> = (0..n)
        .map(|i| eligible.contains(&i) && nu0[i] < -1e-12)
        .collect();

    let mut last_err = None;
    for active in candidate_sets(&eligible, &warm, n) {
        match solve_for_set(inputs, &active, &nu0, sigma0, opts) {
            Ok((mut nu, sigma)) => {
                let imp = implied(inputs, &nu, sigma);
                let mut ok = true;
                for i in 0..n {
                    if active[i] {
                        if nu[i] > 1e-12 {
                            ok = false;
                            break;
                        }
                        nu[i] = nu[i].min(0.0);
                    } else if let Margin::Cap(m) = inputs.agents[i].margin {
                        if !opts.force_unconstrained
                            && portfolio(inputs, &imp, 0.0, sigma, i) > m + 1e-9
                        {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Ok(PointSolution { nu, sigma, active });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::ActiveSetExhausted {
        omega: inputs.weights.to_vec(),
    }))
}

/// Warm-startable entry point used by the sweep solvers: the guess defaults
/// to the previous sweep's values or `(0, sigma_D)`.
pub fn solve_point(
    inputs: &PointInputs,
    guess: Option<(&[f64], f64)>,
    opts: &PointSolveOptions,
) -> Result<PointSolution> {
    active_set_solve(inputs, guess, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentSpec, EconomyParams};
    use crate::vertex;
    use approx::assert_abs_diff_eq;

    fn paper_agents() -> Vec<AgentSpec> {
        vec![
            AgentSpec::constrained(1.1, 1.2).unwrap(),
            AgentSpec::constrained(5.0, 1.2).unwrap(),
        ]
    }

    #[test]
    fn homogeneous_flat_field_is_trivial() {
        let params = EconomyParams::baseline();
        let agents = vec![
            AgentSpec::constrained(2.0, 1.2).unwrap(),
            AgentSpec::constrained(2.0, 1.2).unwrap(),
        ];
        let v0 = vertex::vertex_v(0, 0, &agents, &params).unwrap();
        let weights = [0.4, 0.6];
        let v = [v0, v0];
        let grad = [0.0, 0.0];
        let s = 0.4 * v0 + 0.6 * v0;
        let inputs = PointInputs {
            weights: &weights,
            v: &v,
            grad_v: &grad,
            s,
            agents: &agents,
            params: &params,
        };
        let sol = solve_point(&inputs, None, &PointSolveOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.sigma, params.sigma_d, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.nu[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.nu[1], 0.0, epsilon = 1e-14);
        assert!(sol.active.iter().all(|a| !a));
    }

    #[test]
    fn unconstrained_sentinel_forces_zero_adjustment() {
        let params = EconomyParams::baseline();
        let agents = vec![
            AgentSpec::unconstrained(1.1).unwrap(),
            AgentSpec::unconstrained(5.0).unwrap(),
        ];
        // A deliberately sloped field.
        let weights = [0.3, 0.7];
        let v = [40.0, 22.0];
        let grad = [8.0, -3.0];
        let s = 0.3 * 40.0 + 0.7 * 22.0;
        let inputs = PointInputs {
            weights: &weights,
            v: &v,
            grad_v: &grad,
            s,
            agents: &agents,
            params: &params,
        };
        let sol = solve_point(&inputs, None, &PointSolveOptions::default()).unwrap();
        assert_eq!(sol.nu, vec![0.0, 0.0]);
        // sigma solves the volatility identity alone.
        let res = min_form_residual(&inputs, &sol.nu, sol.sigma);
        assert!(res[2].abs() < 1e-10);
    }

    /// Feeding vertex data reproduces the closed-form vertex adjustments.
    #[test]
    fn vertex_oracle() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        // Vertex of the risk-averse agent 1: agent 0's constraint binds.
        let vert = vertex::solve_vertex(1, &agents, &params).unwrap();
        let weights = [0.0, 1.0];
        let v = [vert.v[0], vert.v[1]];
        let grad = [0.0, 0.0];
        let s = vert.v[1];
        let inputs = PointInputs {
            weights: &weights,
            v: &v,
            grad_v: &grad,
            s,
            agents: &agents,
            params: &params,
        };
        let sol = solve_point(&inputs, None, &PointSolveOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.sigma, params.sigma_d, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.nu[0], vert.nu[0], epsilon = 1e-11);
        assert_abs_diff_eq!(sol.nu[0], -0.00376832, epsilon = 1e-10);
        assert!(sol.active[0]);
        assert!(!sol.active[1]);
    }

    /// Slackness holds at the returned point: nu_i (pi_i - m_i) ~ 0.
    #[test]
    fn complementary_slackness() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        // A field slope that pushes agent 0 against the cap.
        let weights = [0.15, 0.85];
        let v = [45.0, 21.0];
        let grad = [20.0, -10.0];
        let s = 0.15 * 45.0 + 0.85 * 21.0;
        let inputs = PointInputs {
            weights: &weights,
            v: &v,
            grad_v: &grad,
            s,
            agents: &agents,
            params: &params,
        };
        let sol = solve_point(&inputs, None, &PointSolveOptions::default()).unwrap();
        let imp = implied(&inputs, &sol.nu, sol.sigma);
        for i in 0..2 {
            let pi = portfolio(&inputs, &imp, sol.nu[i], sol.sigma, i);
            let m = inputs.agents[i].margin.cap().unwrap();
            assert!(pi <= m + 1e-9, "pi_{i} = {pi} above cap");
            assert!(sol.nu[i] <= 0.0);
            assert!((sol.nu[i] * (pi - m)).abs() < 1e-10);
        }
        // Min-form residual is satisfied to tolerance.
        let res = min_form_residual(&inputs, &sol.nu, sol.sigma);
        for v in res {
            assert!(v.abs() < 1e-9, "min-form residual {v}");
        }
    }

    /// Scaling V, grad V and S by a common factor leaves (nu, sigma)
    /// unchanged: every V-dependence enters through ratios.
    #[test]
    fn value_scale_invariance() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        let weights = [0.3, 0.7];
        let base_v = [42.0, 23.0];
        let base_grad = [12.0, -6.0];
        let s = 0.3 * 42.0 + 0.7 * 23.0;
        let inputs = PointInputs {
            weights: &weights,
            v: &base_v,
            grad_v: &base_grad,
            s,
            agents: &agents,
            params: &params,
        };
        let sol = solve_point(&inputs, None, &PointSolveOptions::default()).unwrap();

        let c = 3.7;
        let v_scaled = [base_v[0] * c, base_v[1] * c];
        let grad_scaled = [base_grad[0] * c, base_grad[1] * c];
        let inputs_scaled = PointInputs {
            weights: &weights,
            v: &v_scaled,
            grad_v: &grad_scaled,
            s: s * c,
            agents: &agents,
            params: &params,
        };
        let sol_scaled = solve_point(&inputs_scaled, None, &PointSolveOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.sigma, sol_scaled.sigma, epsilon = 1e-10);
        for i in 0..2 {
            assert_abs_diff_eq!(sol.nu[i], sol_scaled.nu[i], epsilon = 1e-10);
        }
    }

    /// Warm and cold starts land on the same solution.
    #[test]
    fn warm_start_consistency() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        let weights = [0.2, 0.8];
        let v = [44.0, 21.5];
        let grad = [15.0, -8.0];
        let s = 0.2 * 44.0 + 0.8 * 21.5;
        let inputs = PointInputs {
            weights: &weights,
            v: &v,
            grad_v: &grad,
            s,
            agents: &agents,
            params: &params,
        };
        let cold = solve_point(&inputs, None, &PointSolveOptions::default()).unwrap();
        let warm_guess = vec![-0.002, 0.0];
        let warm = solve_point(
            &inputs,
            Some((&warm_guess, 0.03)),
            &PointSolveOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(cold.sigma, warm.sigma, epsilon = 1e-10);
        for i in 0..2 {
            assert_abs_diff_eq!(cold.nu[i], warm.nu[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn forced_unconstrained_pins_nu() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        let weights = [0.15, 0.85];
        let v = [45.0, 21.0];
        let grad = [20.0, -10.0];
        let s = 0.15 * 45.0 + 0.85 * 21.0;
        let inputs = PointInputs {
            weights: &weights,
            v: &v,
            grad_v: &grad,
            s,
            agents: &agents,
            params: &params,
        };
        let opts = PointSolveOptions {
            force_unconstrained: true,
            ..Default::default()
        };
        let sol = solve_point(&inputs, None, &opts).unwrap();
        assert_eq!(sol.nu, vec![0.0, 0.0]);
    }
}
