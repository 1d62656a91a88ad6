//! Mean-field fixed point of the Stackelberg game.
//!
//! Iterations are independent of each other: nothing in the server cost or
//! the client utilities couples `t` with `t'`, so each iteration gets its own
//! sweep. Within one iteration a round is
//!
//! 1. leader: `r ← argmin U_t` given the current `φ` (or the frozen reward),
//! 2. followers: `ρ_i ← (r - b_i)/(2a_i) - α N φ_i`,
//! 3. estimate: `φ_i ← (1/N) Σ_j σ_ij ρ_j`,
//!
//! stopping once `max_i |Δφ_i| <= ε₀`. The reported state pairs the last
//! `φ` with the reward and budgets computed from it, so the reported profile
//! is an exact Stackelberg equilibrium for that `φ`, and `φ` is within `ε₀`
//! of the mean-field consistency condition.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{external_risk, PropagationModel};
use crate::mechanism::{client_utility, server_cost, social_welfare, GameState, Roster, ServerModelParams};

use super::poa::feasible_bounds;
use super::response::{best_response, feasible_best_response};
use super::reward::solve_unit_reward;
use super::SolverConfig;

/// How the leader sets the reward during the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardPolicy {
    /// Solve the leader's problem each round.
    Optimize,
    /// Hold the reward fixed (follower-only equilibrium).
    Frozen(f64),
}

/// Per-iteration record of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    /// `max_i |φ_i^m - φ_i^{m-1}|` for each round `m`.
    pub residuals: Vec<f64>,
    /// Reward announced in each round.
    pub rewards: Vec<f64>,
    /// Budgets chosen in each round.
    pub budgets: Vec<Vec<f64>>,
}

impl RoundTrace {
    pub fn rounds(&self) -> usize {
        self.residuals.len()
    }
}

/// Converged strategies and everything derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub states: Vec<GameState>,
    /// Exact utilities (computation cost included), indexed `[t][i]`.
    pub utilities: Vec<Vec<f64>>,
    pub server_costs: Vec<f64>,
    /// Cumulative social welfare of the equilibrium budgets.
    pub welfare: f64,
    pub traces: Vec<RoundTrace>,
    pub converged: bool,
    /// Largest round count over iterations.
    pub rounds: usize,
    /// `α S >= 1`: the best-response map need not contract.
    pub non_contractive: bool,
    /// Some best response was raised to the floor (clamping enabled).
    pub clamped: bool,
    /// Budget interval `[ρ_l, ρ_h]` for the realized rewards, when defined.
    pub feasible_bounds: Option<(f64, f64)>,
    /// Whether all budgets fall inside `feasible_bounds` (up to `1e-9`).
    pub within_bounds: Option<bool>,
    pub warnings: Vec<String>,
}

impl EquilibriumReport {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.reward).collect()
    }

    pub fn budgets(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.budgets.clone()).collect()
    }

    /// `max_{t,i} |φ_i - (1/N) Σ_j σ_ij ρ_j|` of the reported states.
    pub fn consistency_gap(&self, model: &PropagationModel) -> f64 {
        let n = model.n() as f64;
        self.states
            .iter()
            .flat_map(|s| {
                let risk = external_risk(model, &s.budgets).expect("report matches model");
                s.mean_field
                    .iter()
                    .zip(risk)
                    .map(move |(&phi, r)| (phi - r / n).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }
}

/// Starting budgets, applied to every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointInit {
    pub budgets: Vec<f64>,
}

struct IterationOutcome {
    state: GameState,
    trace: RoundTrace,
    clamped: bool,
}

/// Runs the sweep for iterations `1..=horizon`.
pub fn fixed_point(
    model: &PropagationModel,
    roster: &Roster,
    server: &ServerModelParams,
    horizon: usize,
    policy: RewardPolicy,
    solver: &SolverConfig,
    init: Option<&FixedPointInit>,
) -> Result<EquilibriumReport> {
    let n = roster.len();
    if model.n() != n {
        return Err(Error::param(
            "roster",
            format!("{} clients but the propagation model has {}", n, model.n()),
        ));
    }
    if horizon == 0 {
        return Err(Error::param("horizon", "need T >= 1"));
    }
    if !(server.alpha >= 0.0 && server.alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in [0, 1), got {}", server.alpha)));
    }
    if !(server.tau > 0.0 && server.tau < 1.0) {
        return Err(Error::param("tau", format!("must lie in (0, 1), got {}", server.tau)));
    }
    solver.validate()?;
    if let Some(init) = init {
        if init.budgets.len() != n {
            return Err(Error::param("init", "initial budgets must have one entry per client"));
        }
    }

    let eps = roster.epsilons(server)?;
    let alpha_s = server.alpha * model.bound();
    let mut warnings = Vec::new();
    let non_contractive = alpha_s >= 1.0;
    if non_contractive {
        warnings.push(format!(
            "non-contractive regime: alpha*S = {alpha_s} >= 1; uniqueness is not guaranteed"
        ));
    }

    let outcomes: Vec<IterationOutcome> = (1..=horizon)
        .into_par_iter()
        .map(|t| {
            let start = match init {
                Some(init) => init.budgets.clone(),
                None => default_start(model, roster, server, &eps, t, policy, solver)?,
            };
            solve_iteration(model, roster, server, &eps, t, policy, solver, &start)
        })
        .collect::<Result<_>>()?;

    let mut states = Vec::with_capacity(horizon);
    let mut traces = Vec::with_capacity(horizon);
    let mut clamped = false;
    for o in outcomes {
        clamped |= o.clamped;
        states.push(o.state);
        traces.push(o.trace);
    }
    if clamped {
        warnings.push("some best responses were clamped to the budget floor".into());
    }

    let mut utilities = Vec::with_capacity(horizon);
    let mut server_costs = Vec::with_capacity(horizon);
    for s in &states {
        let risk = external_risk(model, &s.budgets)?;
        utilities.push(
            roster
                .clients()
                .iter()
                .zip(s.budgets.iter().zip(&risk))
                .map(|(c, (&rho, &rk))| client_utility(s.reward, rho, rk, c, server.alpha))
                .collect(),
        );
        server_costs.push(server_cost(s.reward, &s.budgets, &eps, server.tau, s.t)?);
    }
    let rewards: Vec<f64> = states.iter().map(|s| s.reward).collect();
    let budgets: Vec<Vec<f64>> = states.iter().map(|s| s.budgets.clone()).collect();
    let welfare = social_welfare(&rewards, &budgets, model, roster, server.alpha)?;

    let bounds = if non_contractive {
        None
    } else {
        Some(feasible_bounds(&rewards, roster, model, server.alpha)?)
    };
    let within_bounds = bounds.map(|(lo, hi)| {
        let tol = 1e-9 * hi.abs().max(1.0);
        budgets.iter().flatten().all(|&b| b >= lo - tol && b <= hi + tol)
    });
    if let (Some((lo, hi)), Some(false)) = (bounds, within_bounds) {
        warnings.push(format!("budgets leave the interval [{lo}, {hi}]"));
    }

    Ok(EquilibriumReport {
        rounds: traces.iter().map(RoundTrace::rounds).max().unwrap_or(0),
        states,
        utilities,
        server_costs,
        welfare,
        traces,
        converged: true,
        non_contractive,
        clamped,
        feasible_bounds: bounds,
        within_bounds,
        warnings,
    })
}

/// Midpoint of the feasible budget interval at the reward the leader would
/// announce to clients ignoring external risk; `1.0` when undefined.
fn default_start(
    model: &PropagationModel,
    roster: &Roster,
    server: &ServerModelParams,
    eps: &[f64],
    t: usize,
    policy: RewardPolicy,
    solver: &SolverConfig,
) -> Result<Vec<f64>> {
    let n = roster.len();
    let reward = match policy {
        RewardPolicy::Frozen(r) => r,
        RewardPolicy::Optimize => solve_unit_reward(&vec![0.0; n], eps, roster, server.tau, server.alpha, t, solver)?,
    };
    let start = match feasible_bounds(&[reward], roster, model, server.alpha) {
        Ok((lo, hi)) if hi > solver.rho_min => 0.5 * (lo.max(solver.rho_min) + hi),
        _ => 1.0,
    };
    Ok(vec![start; n])
}

#[allow(clippy::too_many_arguments)]
fn solve_iteration(
    model: &PropagationModel,
    roster: &Roster,
    server: &ServerModelParams,
    eps: &[f64],
    t: usize,
    policy: RewardPolicy,
    solver: &SolverConfig,
    start: &[f64],
) -> Result<IterationOutcome> {
    let n = roster.len();
    let nf = n as f64;
    let mut phi: Vec<f64> = external_risk(model, start)?.iter().map(|r| r / nf).collect();
    let mut trace = RoundTrace {
        residuals: Vec::new(),
        rewards: Vec::new(),
        budgets: Vec::new(),
    };
    let mut clamped = false;

    for _ in 0..solver.max_rounds {
        let reward = match policy {
            RewardPolicy::Frozen(r) => r,
            RewardPolicy::Optimize => solve_unit_reward(&phi, eps, roster, server.tau, server.alpha, t, solver)?,
        };
        let mut budgets = Vec::with_capacity(n);
        for (i, c) in roster.clients().iter().enumerate() {
            let rho = match policy {
                // The reward floor already keeps every response at or above
                // ρ_min; max() only absorbs rounding.
                RewardPolicy::Optimize => best_response(reward, phi[i], c, server.alpha, n).max(solver.rho_min),
                RewardPolicy::Frozen(_) => {
                    match feasible_best_response(i, reward, phi[i], c, server.alpha, n, solver.rho_min) {
                        Ok(rho) => rho,
                        Err(_) if solver.clamp_infeasible => {
                            clamped = true;
                            solver.rho_min
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            budgets.push(rho);
        }
        let next: Vec<f64> = external_risk(model, &budgets)?.iter().map(|r| r / nf).collect();
        let residual = next
            .iter()
            .zip(&phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let finite = reward.is_finite() && next.iter().all(|v| v.is_finite());
        trace.residuals.push(if finite { residual } else { f64::INFINITY });
        trace.rewards.push(reward);
        trace.budgets.push(budgets.clone());
        if !finite {
            return Err(Error::NonConvergence {
                t,
                rounds: trace.rounds(),
                last_residual: f64::INFINITY,
                trace: trace.residuals,
            });
        }

        if residual <= solver.eps0 {
            return Ok(IterationOutcome {
                state: GameState {
                    t,
                    reward,
                    budgets,
                    mean_field: phi,
                },
                trace,
                clamped,
            });
        }
        phi = next;
    }
    Err(Error::NonConvergence {
        t,
        rounds: solver.max_rounds,
        last_residual: trace.residuals.last().copied().unwrap_or(f64::NAN),
        trace: trace.residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::ClientProfile;
    use nalgebra::DMatrix;

    fn symmetric_pair() -> (PropagationModel, Roster, ServerModelParams) {
        let model = PropagationModel::from_sigma(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), 0.5, 1).unwrap();
        let roster = Roster::new(vec![ClientProfile::new(1.0, 1.0, 1), ClientProfile::new(1.0, 1.0, 1)]).unwrap();
        let server = ServerModelParams { alpha: 0.1, n_clients: 2, ..Default::default() };
        (model, roster, server)
    }

    #[test]
    fn frozen_reward_pair_solves_linear_system() {
        // ρ = 1 − 0.1ρ' with ρ = ρ' gives ρ = 1/1.1.
        let (model, roster, server) = symmetric_pair();
        let solver = SolverConfig { eps0: 1e-12, ..Default::default() };
        let rep = fixed_point(&model, &roster, &server, 3, RewardPolicy::Frozen(3.0), &solver, None).unwrap();
        for s in &rep.states {
            assert_eq!(s.reward, 3.0);
            for &b in &s.budgets {
                assert!((b - 1.0 / 1.1).abs() < 1e-10);
            }
        }
        assert!(rep.converged);
        assert!(rep.consistency_gap(&model) <= 1e-12);
    }

    #[test]
    fn decoupled_clients_settle_after_first_round() {
        let (model, roster, mut server) = symmetric_pair();
        server.alpha = 0.0;
        let rep = fixed_point(&model, &roster, &server, 2, RewardPolicy::Frozen(3.0), &SolverConfig::default(), None).unwrap();
        for tr in &rep.traces {
            assert_eq!(tr.budgets[0], vec![1.0, 1.0]);
            assert!(tr.rounds() <= 2);
        }
    }

    #[test]
    fn infeasible_frozen_reward_is_reported_or_clamped() {
        let (model, roster, server) = symmetric_pair();
        let err = fixed_point(&model, &roster, &server, 1, RewardPolicy::Frozen(0.5), &SolverConfig::default(), None);
        assert!(matches!(err, Err(Error::Infeasible { .. })));
        let solver = SolverConfig { clamp_infeasible: true, ..Default::default() };
        let rep = fixed_point(&model, &roster, &server, 1, RewardPolicy::Frozen(0.5), &solver, None).unwrap();
        assert!(rep.clamped);
        assert!(rep.states[0].budgets.iter().all(|&b| b == solver.rho_min));
    }

    #[test]
    fn round_cap_reports_trace() {
        let (model, roster, server) = symmetric_pair();
        let solver = SolverConfig { eps0: 1e-15, max_rounds: 3, ..Default::default() };
        let init = FixedPointInit { budgets: vec![5.0, 0.1] };
        match fixed_point(&model, &roster, &server, 1, RewardPolicy::Frozen(3.0), &solver, Some(&init)) {
            Err(Error::NonConvergence { rounds, trace, .. }) => {
                assert_eq!(rounds, 3);
                assert_eq!(trace.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn leader_optimizes_each_iteration() {
        let (model, roster, server) = symmetric_pair();
        let rep = fixed_point(&model, &roster, &server, 4, RewardPolicy::Optimize, &SolverConfig::default(), None).unwrap();
        // The accuracy term shrinks as 1/t, so the leader pays less later on.
        let r = rep.rewards();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
        assert!(rep.states.iter().all(|s| s.budgets.iter().all(|&b| b > 0.0)));
    }
}
