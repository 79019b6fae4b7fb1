//! Domain types and the closed-form aggregate maps.
//!
//! Everything here is a pure function of a state point (consumption
//! weights), per-agent adjustments `nu_i`, and the stock diffusion `sigma`.
//! The maps are exact algebra; no iteration happens at this level.

use serde::Serialize;

use crate::error::{Error, Result};

/// Dividend process and time preference.
///
/// The aggregate endowment follows a geometric Brownian motion with drift
/// `mu_d` and diffusion `sigma_d`; all agents discount at rate `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EconomyParams {
    pub mu_d: f64,
    pub sigma_d: f64,
    pub rho: f64,
}

impl EconomyParams {
    pub fn new(mu_d: f64, sigma_d: f64, rho: f64) -> Result<Self> {
        if !sigma_d.is_finite() || sigma_d <= 0.0 {
            return Err(Error::param("sigma_d", "must be finite and > 0"));
        }
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::param("rho", "must be finite and > 0"));
        }
        if !mu_d.is_finite() {
            return Err(Error::param("mu_d", "must be finite"));
        }
        Ok(Self { mu_d, sigma_d, rho })
    }

    /// Baseline calibration used throughout the numerical experiments:
    /// `(mu_d, sigma_d, rho) = (0.01, 0.032, 0.02)`.
    pub fn baseline() -> Self {
        Self {
            mu_d: 0.01,
            sigma_d: 0.032,
            rho: 0.02,
        }
    }
}

/// Portfolio constraint set of one agent.
///
/// `Cap(m)` is the margin constraint `pi <= m`; `Unconstrained` admits any
/// portfolio and forces the adjustment to zero identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Margin {
    Cap(f64),
    Unconstrained,
}

impl Margin {
    pub fn is_finite(&self) -> bool {
        matches!(self, Margin::Cap(_))
    }

    pub fn cap(&self) -> Option<f64> {
        match self {
            Margin::Cap(m) => Some(*m),
            Margin::Unconstrained => None,
        }
    }
}

/// Risk aversion and constraint of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentSpec {
    pub gamma: f64,
    pub margin: Margin,
}

impl AgentSpec {
    pub fn new(gamma: f64, margin: Margin) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::param("gamma", "must be finite and > 0"));
        }
        if let Margin::Cap(m) = margin {
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::param("margin", "must be finite and > 0"));
            }
        }
        Ok(Self { gamma, margin })
    }

    pub fn constrained(gamma: f64, m: f64) -> Result<Self> {
        Self::new(gamma, Margin::Cap(m))
    }

    pub fn unconstrained(gamma: f64) -> Result<Self> {
        Self::new(gamma, Margin::Unconstrained)
    }
}

/// A point on the consumption-weight simplex.
///
/// Stores the `N-1` free coordinates and the derived full vector whose last
/// entry closes the sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint {
    omega: Vec<f64>,
    full: Vec<f64>,
}

impl StatePoint {
    pub fn new(omega: &[f64]) -> Result<Self> {
        let mut sum = 0.0;
        for &w in omega {
            if !w.is_finite() || w < -1e-14 {
                return Err(Error::OutOfDomain {
                    omega: omega.to_vec(),
                });
            }
            sum += w;
        }
        if sum > 1.0 + 1e-12 {
            return Err(Error::OutOfDomain {
                omega: omega.to_vec(),
            });
        }
        let mut full = omega.to_vec();
        full.push((1.0 - sum).max(0.0));
        Ok(Self {
            omega: omega.to_vec(),
            full,
        })
    }

    /// The `N-1` free coordinates.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// All `N` weights; sums to one.
    pub fn full_weights(&self) -> &[f64] {
        &self.full
    }

    pub fn n_agents(&self) -> usize {
        self.full.len()
    }
}

/// Aggregate market quantities at one state point.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    /// Market price of risk.
    pub theta: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Stock diffusion.
    pub sigma: f64,
    /// Per-agent adjustments, all `<= 0` under margin constraints.
    pub nu: Vec<f64>,
    /// Per-agent adjusted price of risk `kappa_i = theta + nu_i / sigma`.
    pub kappa: Vec<f64>,
}

/// Proportional drift and diffusion of each agent's consumption weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDynamics {
    pub mu_w: Vec<f64>,
    pub sigma_w: Vec<f64>,
}

/// Support function `delta_i(nu)` of the agent's constraint set.
///
/// `-m nu` for a margin cap (effective domain `nu <= 0`), zero for an
/// unconstrained agent (domain `{0}`).
pub fn support_value(agent: &AgentSpec, nu: f64) -> Result<f64> {
    match agent.margin {
        Margin::Cap(m) => {
            if nu > 1e-12 {
                Err(Error::InvalidAdjustment { nu })
            } else {
                Ok(-m * nu.min(0.0))
            }
        }
        Margin::Unconstrained => {
            if nu.abs() > 1e-12 {
                Err(Error::InvalidAdjustment { nu })
            } else {
                Ok(0.0)
            }
        }
    }
}

fn weighted_eis(state: &StatePoint, agents: &[AgentSpec]) -> Result<f64> {
    let xi: f64 = state
        .full_weights()
        .iter()
        .zip(agents)
        .map(|(w, a)| w / a.gamma)
        .sum();
    if xi <= 0.0 || !xi.is_finite() {
        return Err(Error::param(
            "weights",
            "weighted average of 1/gamma must be positive",
        ));
    }
    Ok(xi)
}

/// Market price of risk at a state point given adjustments and volatility.
///
/// `theta = (sum_i w_i/gamma_i)^-1 (sigma_D - (1/sigma) sum_i w_i nu_i/gamma_i)`.
pub fn market_price_of_risk(
    state: &StatePoint,
    nu: &[f64],
    sigma: f64,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::param("sigma", "must be > 0"));
    }
    let xi = weighted_eis(state, agents)?;
    let big_xi: f64 = state
        .full_weights()
        .iter()
        .zip(agents)
        .zip(nu)
        .map(|((w, a), v)| w * v / a.gamma)
        .sum();
    Ok((params.sigma_d - big_xi / sigma) / xi)
}

/// Risk-free rate at a state point.
///
/// Uses the prudence term with the squared risk-aversion denominator,
/// `(1 + gamma_i)/gamma_i^2`, which is the unique choice consistent with the
/// per-agent consumption drift and consumption-good market clearing.
pub fn interest_rate(
    state: &StatePoint,
    nu: &[f64],
    sigma: f64,
    theta: f64,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::param("sigma", "must be > 0"));
    }
    let xi = weighted_eis(state, agents)?;
    let mut smoothing = 0.0;
    let mut prudence = 0.0;
    for ((w, a), &v) in state.full_weights().iter().zip(agents).zip(nu) {
        let delta = support_value(a, v)?;
        let kappa = theta + v / sigma;
        smoothing += w / a.gamma * delta;
        prudence += (1.0 + a.gamma) / (a.gamma * a.gamma) * kappa * kappa * w;
    }
    Ok((params.mu_d + params.rho * xi - smoothing - 0.5 * prudence) / xi)
}

/// Assembles the full [`MarketState`] for given adjustments and volatility.
pub fn market_state(
    state: &StatePoint,
    nu: &[f64],
    sigma: f64,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<MarketState> {
    let theta = market_price_of_risk(state, nu, sigma, agents, params)?;
    let r = interest_rate(state, nu, sigma, theta, agents, params)?;
    let kappa = nu.iter().map(|v| theta + v / sigma).collect();
    Ok(MarketState {
        theta,
        r,
        sigma,
        nu: nu.to_vec(),
        kappa,
    })
}

/// Proportional drift and diffusion of every agent's consumption weight.
///
/// `mu_w_i = (1/gamma_i)(r + delta_i - rho + (1+gamma_i)/(2 gamma_i) kappa_i^2
///           - sigma_D kappa_i) + sigma_D^2 - mu_D`,
/// `sigma_w_i = kappa_i / gamma_i - sigma_D`.
pub fn weight_dynamics(
    market: &MarketState,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<WeightDynamics> {
    let mut mu_w = Vec::with_capacity(agents.len());
    let mut sigma_w = Vec::with_capacity(agents.len());
    for (a, (&v, &kappa)) in agents.iter().zip(market.nu.iter().zip(&market.kappa)) {
        let delta = support_value(a, v)?;
        let g = a.gamma;
        mu_w.push(
            (market.r + delta - params.rho + 0.5 * (1.0 + g) / g * kappa * kappa
                - params.sigma_d * kappa)
                / g
                + params.sigma_d * params.sigma_d
                - params.mu_d,
        );
        sigma_w.push(kappa / g - params.sigma_d);
    }
    Ok(WeightDynamics { mu_w, sigma_w })
}

/// Per-agent consumption drift and diffusion implied by the market state.
///
/// Market clearing requires the weight-averaged drift and diffusion to equal
/// `mu_D` and `sigma_D`; this is the identity the aggregate maps are solved
/// from, so it holds to rounding.
pub fn consumption_moments(
    market: &MarketState,
    agents: &[AgentSpec],
    params: &EconomyParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut mu_c = Vec::with_capacity(agents.len());
    let mut sigma_c = Vec::with_capacity(agents.len());
    for (a, (&v, &kappa)) in agents.iter().zip(market.nu.iter().zip(&market.kappa)) {
        let delta = support_value(a, v)?;
        let g = a.gamma;
        mu_c.push((market.r - params.rho + delta) / g + 0.5 * (1.0 + g) / (g * g) * kappa * kappa);
        sigma_c.push(kappa / g);
    }
    Ok((mu_c, sigma_c))
}

/// Risk-aversion level at which an agent's consumption-weight volatility is
/// zero, one entry per agent's constrained/unconstrained branch. Solving
/// `sigma_w = 0` gives `gamma* = theta / sigma_D + nu_i / (sigma sigma_D)`.
/// Diagnostic only.
pub fn marginal_gamma(market: &MarketState, params: &EconomyParams) -> Vec<f64> {
    market
        .nu
        .iter()
        .map(|v| market.theta / params.sigma_d + v / (market.sigma * params.sigma_d))
        .collect()
}
