//! Stackelberg equilibrium via mean-field fixed-point iteration, the
//! social-agnostic baseline, the welfare optimum, and price-of-anarchy
//! analysis.

mod fixed_point;
mod poa;
mod response;
mod reward;

pub use fixed_point::{fixed_point, EquilibriumReport, FixedPointInit, RewardPolicy, RoundTrace};
pub use poa::{
    feasible_bounds, poa_closed_form_mpp, poa_true, price_of_anarchy, reward_ratio_range, sa_budgets_at, sa_equilibrium,
    sa_equilibrium_path, sa_lower_bound, sw_optimum, sw_optimum_path, PoAReport, SaOutcome, SwOptimum,
};
pub use response::{best_response, feasible_best_response};
pub use reward::{solve_unit_reward, InducedServerCost};

use crate::error::{Error, Result};

/// Tolerances and caps shared by the equilibrium solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Fixed-point threshold on `max |Δφ|`.
    pub eps0: f64,
    pub max_rounds: usize,
    /// Upper limit for the reward bracket expansion.
    pub bracket_cap: f64,
    /// Relative width at which reward bisection stops.
    pub reward_tol: f64,
    /// Hard floor on budgets.
    pub rho_min: f64,
    /// Raise infeasible best responses to `rho_min` instead of failing.
    pub clamp_infeasible: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps0: 1e-3,
            max_rounds: 10_000,
            bracket_cap: 1e6,
            reward_tol: 1e-10,
            rho_min: 1e-9,
            clamp_infeasible: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0) {
            return Err(Error::param("eps0", format!("must be positive, got {}", self.eps0)));
        }
        if self.max_rounds == 0 {
            return Err(Error::param("max_rounds", "must be positive"));
        }
        if !(self.bracket_cap > 0.0) {
            return Err(Error::param("bracket_cap", "must be positive"));
        }
        if !(self.reward_tol > 0.0 && self.reward_tol < 1.0) {
            return Err(Error::param("reward_tol", "must lie in (0, 1)"));
        }
        if !(self.rho_min > 0.0) {
            return Err(Error::param("rho_min", "must be positive"));
        }
        Ok(())
    }
}
