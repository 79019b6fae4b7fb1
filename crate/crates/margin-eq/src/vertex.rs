//! Closed-form equilibrium at simplex vertices, where a single agent
//! consumes the whole endowment. Supplies Dirichlet data for the edge and
//! interior solvers.

use crate::error::{Error, Result};
use crate::model::{support_value, AgentSpec, EconomyParams, Margin};

/// Equilibrium quantities at the vertex where agent `dominant` holds the
/// entire economy.
#[derive(Debug, Clone)]
pub struct VertexSolution {
    pub dominant: usize,
    pub theta: f64,
    pub r: f64,
    pub sigma: f64,
    pub nu: Vec<f64>,
    pub v: Vec<f64>,
}

/// `(theta, r, sigma)` at the vertex of agent `j`:
/// `theta = sigma_D gamma_j`, `r = rho + mu_D gamma_j - gamma_j (1 + gamma_j)
/// sigma_D^2 / 2`, `sigma = sigma_D`.
pub fn vertex_aggregates(j: usize, agents: &[AgentSpec], params: &EconomyParams) -> (f64, f64, f64) {
    let g = agents[j].gamma;
    let theta = params.sigma_d * g;
    let r = params.rho + params.mu_d * g - g * (1.0 + g) * params.sigma_d * params.sigma_d / 2.0;
    (theta, r, params.sigma_d)
}

/// Adjustment of agent `i` at the vertex of agent `j`:
/// `nu_i = min{0, (m_i gamma_i - gamma_j) sigma_D^2}` for a margin cap,
/// zero for an unconstrained agent.
pub fn vertex_adjustment(
    i: usize,
    j: usize,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> f64 {
    match agents[i].margin {
        Margin::Unconstrained => 0.0,
        Margin::Cap(m) => {
            let s2 = params.sigma_d * params.sigma_d;
            (0.0f64).min((m * agents[i].gamma - agents[j].gamma) * s2)
        }
    }
}

/// Wealth/consumption ratio of agent `i` at the vertex of agent `j`.
///
/// `V_i = gamma_i / (rho - (1 - gamma_i) [ (theta_v + nu_i/sigma_D)^2 /
/// (2 gamma_i) + r_v + delta_i(nu_i) ])`, the state-independent fixed point
/// of agent `i`'s valuation equation in agent `j`'s autarky economy. The
/// adjusted price of risk uses the vertex `theta_v`, not the fundamental
/// diffusion, so that this value is exactly the constant the interior
/// equation relaxes to.
pub fn vertex_v(i: usize, j: usize, agents: &[AgentSpec], params: &EconomyParams) -> Result<f64> {
    if i == j {
        if let Margin::Cap(m) = agents[j].margin {
            if m < 1.0 {
                return Err(Error::VertexMarginTooTight {
                    agent: j,
                    margin: m,
                });
            }
        }
    }
    let (theta_v, r_v, sigma_v) = vertex_aggregates(j, agents, params);
    let nu_i = vertex_adjustment(i, j, agents, params);
    let delta_i = support_value(&agents[i], nu_i)?;
    let g = agents[i].gamma;
    let kappa = theta_v + nu_i / sigma_v;
    let denom = params.rho - (1.0 - g) * (kappa * kappa / (2.0 * g) + r_v + delta_i);
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::Transversality {
            agent: i,
            dominant: j,
            denom,
        });
    }
    Ok(g / denom)
}

/// Full vertex data for all agents at the vertex of agent `j`.
pub fn solve_vertex(
    j: usize,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<VertexSolution> {
    let (theta, r, sigma) = vertex_aggregates(j, agents, params);
    let nu: Vec<f64> = (0..agents.len())
        .map(|i| vertex_adjustment(i, j, agents, params))
        .collect();
    let v = (0..agents.len())
        .map(|i| vertex_v(i, j, agents, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(VertexSolution {
        dominant: j,
        theta,
        r,
        sigma,
        nu,
        v,
    })
}

/// Vertex data with every adjustment pinned at zero, used as Dirichlet data
/// for complete-market benchmark runs.
pub fn solve_vertex_unconstrained(
    j: usize,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<VertexSolution> {
    let (theta, r, sigma) = vertex_aggregates(j, agents, params);
    let v = agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let g = a.gamma;
            let denom = params.rho - (1.0 - g) * (theta * theta / (2.0 * g) + r);
            if denom <= 0.0 || !denom.is_finite() {
                Err(Error::Transversality {
                    agent: i,
                    dominant: j,
                    denom,
                })
            } else {
                Ok(g / denom)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VertexSolution {
        dominant: j,
        theta,
        r,
        sigma,
        nu: vec![0.0; agents.len()],
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{interest_rate, market_price_of_risk, StatePoint};
    use approx::assert_abs_diff_eq;

    fn paper_agents() -> Vec<AgentSpec> {
        vec![
            AgentSpec::constrained(1.1, 1.2).unwrap(),
            AgentSpec::constrained(5.0, 1.2).unwrap(),
        ]
    }

    #[test]
    fn aggregates_closed_forms() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        let (theta, r, sigma) = vertex_aggregates(0, &agents, &params);
        assert_abs_diff_eq!(theta, 0.0352, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.02981728, epsilon = 1e-12);
        assert_abs_diff_eq!(sigma, 0.032, epsilon = 1e-15);

        let log_agent = vec![AgentSpec::unconstrained(1.0).unwrap()];
        let (_, r1, _) = vertex_aggregates(0, &log_agent, &params);
        assert_abs_diff_eq!(
            r1,
            params.rho + params.mu_d - params.sigma_d * params.sigma_d,
            epsilon = 1e-15
        );

        let (theta5, _, _) = vertex_aggregates(1, &agents, &params);
        assert_abs_diff_eq!(theta5, 0.16, epsilon = 1e-15);
    }

    #[test]
    fn adjustments() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        // Risk-averse agent at the tolerant agent's vertex: slack.
        assert_eq!(vertex_adjustment(1, 0, &agents, &params), 0.0);
        // Tolerant agent at the averse agent's vertex: binding.
        let nu = vertex_adjustment(0, 1, &agents, &params);
        assert_abs_diff_eq!(nu, (1.2 * 1.1 - 5.0) * 0.032 * 0.032, epsilon = 1e-15);
        assert_abs_diff_eq!(nu, -0.00376832, epsilon = 1e-12);
        // Dominant agent with m >= 1 holds the market unconstrained.
        assert_eq!(vertex_adjustment(0, 0, &agents, &params), 0.0);
    }

    #[test]
    fn adjustment_monotone_in_dominant_gamma() {
        let params = EconomyParams::baseline();
        let mut prev = f64::INFINITY;
        for gj in [0.5, 1.0, 2.0, 3.0, 5.0, 8.0] {
            let agents = vec![
                AgentSpec::constrained(1.1, 1.2).unwrap(),
                AgentSpec::constrained(gj, 1.2).unwrap(),
            ];
            let nu = vertex_adjustment(0, 1, &agents, &params);
            assert!(nu <= prev + 1e-15);
            prev = nu;
        }
    }

    #[test]
    fn unconstrained_sentinel_never_adjusts() {
        let params = EconomyParams::baseline();
        let agents = vec![
            AgentSpec::unconstrained(1.1).unwrap(),
            AgentSpec::constrained(5.0, 1.2).unwrap(),
        ];
        assert_eq!(vertex_adjustment(0, 1, &agents, &params), 0.0);
        assert_eq!(vertex_adjustment(0, 0, &agents, &params), 0.0);
    }

    #[test]
    fn own_vertex_values() {
        let params = EconomyParams::baseline();
        let log_agent = vec![AgentSpec::constrained(1.0, 1.2).unwrap()];
        assert_abs_diff_eq!(
            vertex_v(0, 0, &log_agent, &params).unwrap(),
            50.0,
            epsilon = 1e-12
        );

        let agents = paper_agents();
        let v11 = vertex_v(0, 0, &agents, &params).unwrap();
        assert_abs_diff_eq!(v11, 1.1 / 0.023038048, epsilon = 1e-9);

        // gamma = 5 own-vertex value; frozen closed-form evaluation.
        let v5 = vertex_v(1, 1, &agents, &params).unwrap();
        let (theta5, r5, _) = vertex_aggregates(1, &agents, &params);
        let denom = params.rho - (1.0 - 5.0) * (theta5 * theta5 / 10.0 + r5);
        assert_abs_diff_eq!(v5, 5.0 / denom, epsilon = 1e-12);
        assert!(v5 > 0.0 && v5.is_finite());
        assert_abs_diff_eq!(v5, 20.096463022508038, epsilon = 1e-9);
    }

    /// Vertex values are the state-independent fixed points of the
    /// valuation equation: with all derivatives zero the equation reduces
    /// to `a_i V_i + 1 = 0` with coefficients from the vertex market state.
    #[test]
    fn vertex_satisfies_flat_pde() {
        let params = EconomyParams::baseline();
        let agents = paper_agents();
        for j in 0..2 {
            let sol = solve_vertex(j, &agents, &params).unwrap();
            // Consistency with the aggregate maps at the vertex state.
            let omega = if j == 0 { [1.0] } else { [0.0] };
            let state = StatePoint::new(&omega).unwrap();
            let theta =
                market_price_of_risk(&state, &sol.nu, sol.sigma, &agents, &params).unwrap();
            let r = interest_rate(&state, &sol.nu, sol.sigma, theta, &agents, &params).unwrap();
            assert_abs_diff_eq!(theta, sol.theta, epsilon = 1e-12);
            assert_abs_diff_eq!(r, sol.r, epsilon = 1e-12);

            for i in 0..2 {
                let g = agents[i].gamma;
                let kappa = sol.theta + sol.nu[i] / sol.sigma;
                let delta = support_value(&agents[i], sol.nu[i]).unwrap();
                let a = ((1.0 - g) * (sol.r + delta) - params.rho
                    + (1.0 - g) / (2.0 * g) * kappa * kappa)
                    / g;
                let residual = a * sol.v[i] + 1.0;
                assert_abs_diff_eq!(residual, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn transversality_violation_detected() {
        // A dominant near-risk-neutral agent with strong growth makes the
        // discounted value explode.
        let params = EconomyParams::new(1.0, 0.032, 0.02).unwrap();
        let agents = vec![AgentSpec::constrained(0.5, 1.2).unwrap()];
        match vertex_v(0, 0, &agents, &params) {
            Err(Error::Transversality { agent: 0, .. }) => {}
            other => panic!("expected transversality error, got {other:?}"),
        }
    }

    #[test]
    fn tight_dominant_margin_rejected() {
        let params = EconomyParams::baseline();
        let agents = vec![AgentSpec::constrained(2.0, 0.8).unwrap()];
        assert!(matches!(
            vertex_v(0, 0, &agents, &params),
            Err(Error::VertexMarginTooTight { .. })
        ));
    }
}
