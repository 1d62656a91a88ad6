//! Social-agnostic baseline, the welfare-maximizing budgets, and
//! price-of-anarchy figures.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{external_risk, PropagationModel};
use crate::mechanism::{social_welfare, Roster, ServerModelParams};

use super::fixed_point::EquilibriumReport;
use super::reward::solve_unit_reward;
use super::SolverConfig;

/// Rewards and budgets when clients ignore external risk.
#[derive(Debug, Clone, PartialEq)]
pub struct SaOutcome {
    pub rewards: Vec<f64>,
    pub budgets: Vec<Vec<f64>>,
}

/// One iteration of the social-agnostic game. The leader solves its problem
/// as if every mean-field estimate were zero, and clients answer with
/// `(r - b_i)/(2a_i)`.
pub fn sa_equilibrium(
    roster: &Roster,
    server: &ServerModelParams,
    eps: &[f64],
    t: usize,
    solver: &SolverConfig,
) -> Result<(f64, Vec<f64>)> {
    let zeros = vec![0.0; roster.len()];
    let r = solve_unit_reward(&zeros, eps, roster, server.tau, server.alpha, t, solver)?;
    Ok((r, sa_budgets(r, roster, solver.rho_min)))
}

fn sa_budgets(r: f64, roster: &Roster, floor: f64) -> Vec<f64> {
    roster
        .clients()
        .iter()
        .map(|c| ((r - c.b) / (2.0 * c.a)).max(floor))
        .collect()
}

/// [`sa_equilibrium`] over iterations `1..=horizon`.
pub fn sa_equilibrium_path(
    roster: &Roster,
    server: &ServerModelParams,
    horizon: usize,
    solver: &SolverConfig,
) -> Result<SaOutcome> {
    let eps = roster.epsilons(server)?;
    let mut rewards = Vec::with_capacity(horizon);
    let mut budgets = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let (r, b) = sa_equilibrium(roster, server, &eps, t, solver)?;
        rewards.push(r);
        budgets.push(b);
    }
    Ok(SaOutcome { rewards, budgets })
}

/// Social-agnostic budgets at an imposed reward.
pub fn sa_budgets_at(r: f64, roster: &Roster) -> Vec<f64> {
    sa_budgets(r, roster, f64::NEG_INFINITY)
}

/// Welfare-maximizing budgets for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SwOptimum {
    pub budgets: Vec<f64>,
    /// The floor is active at the maximizer for at least one client.
    pub clamped: bool,
}

/// Maximizes `Σ_i [r ρ_i - a_i s_i² - b_i s_i]`, `s = (I + ασ)ρ`, over
/// `ρ >= floor`.
///
/// The welfare is a strictly concave quadratic. Its unconstrained maximizer
/// solves `Mᵀ diag(2a) M ρ = r·1 - Mᵀ b` with `M = I + ασ`; when that dips
/// below the floor, an active-set pass finds the constrained maximizer.
pub fn sw_optimum(r: f64, model: &PropagationModel, roster: &Roster, alpha: f64, floor: f64) -> Result<SwOptimum> {
    let n = roster.len();
    if model.n() != n {
        return Err(Error::param("roster", "client count does not match the propagation model"));
    }
    let m = DMatrix::identity(n, n) + model.sigma() * alpha;
    let two_a = DVector::from_iterator(n, roster.clients().iter().map(|c| 2.0 * c.a));
    let b = DVector::from_iterator(n, roster.clients().iter().map(|c| c.b));
    let scaled = DMatrix::from_diagonal(&two_a) * &m;
    let hessian = m.transpose() * scaled;
    let rhs = DVector::from_element(n, r) - m.transpose() * b;
    let solution = hessian
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("welfare stationarity system is singular".into()))?;
    if solution.iter().all(|&x| x >= floor) {
        return Ok(SwOptimum {
            budgets: solution.iter().copied().collect(),
            clamped: false,
        });
    }
    let shift = DVector::from_element(n, floor);
    let excess = nonnegative_quadratic_min(&hessian, &(rhs - &hessian * shift))?;
    Ok(SwOptimum {
        budgets: excess.iter().map(|y| y + floor).collect(),
        clamped: true,
    })
}

/// Minimizes `½ yᵀ H y - dᵀ y` over `y >= 0` for positive definite `H`
/// (Lawson-Hanson active set).
fn nonnegative_quadratic_min(h: &DMatrix<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    let n = d.len();
    let tol = 1e-13 * d.amax().max(1.0);
    let mut free = vec![false; n];
    let mut y = DVector::<f64>::zeros(n);
    for _ in 0..(10 * n + 50) {
        let descent = d - h * &y;
        let enter = (0..n)
            .filter(|&j| !free[j] && descent[j] > tol)
            .max_by(|&i, &j| descent[i].total_cmp(&descent[j]));
        let Some(enter) = enter else {
            return Ok(y);
        };
        free[enter] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| free[j]).collect();
            let sub = h.select_rows(&idx).select_columns(&idx);
            let z = sub
                .lu()
                .solve(&d.select_rows(&idx))
                .ok_or_else(|| Error::Solver("welfare active-set system is singular".into()))?;
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in idx.iter().enumerate() {
                    y[j] = z[k];
                }
                break;
            }
            // Move toward z until the first free coordinate hits zero.
            let mut step = 1.0;
            let mut blocking = Vec::new();
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let limit = if y[j] > 0.0 { y[j] / (y[j] - z[k]) } else { 0.0 };
                    if limit < step {
                        step = limit;
                        blocking.clear();
                    }
                    if limit <= step {
                        blocking.push(j);
                    }
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                y[j] += step * (z[k] - y[j]);
                if y[j] <= 0.0 {
                    blocking.push(j);
                }
            }
            for j in blocking {
                y[j] = 0.0;
                free[j] = false;
            }
        }
    }
    Err(Error::Solver("welfare active set did not settle".into()))
}

/// Welfare-optimal budgets for every reward in `rewards`.
pub fn sw_optimum_path(
    rewards: &[f64],
    model: &PropagationModel,
    roster: &Roster,
    alpha: f64,
    floor: f64,
) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut clamped = false;
    let budgets = rewards
        .iter()
        .map(|&r| {
            let opt = sw_optimum(r, model, roster, alpha, floor)?;
            clamped |= opt.clamped;
            Ok(opt.budgets)
        })
        .collect::<Result<_>>()?;
    Ok((budgets, clamped))
}

/// `W(ρ^SW) / W(ρ^eq)`; undefined for nonpositive equilibrium welfare.
pub fn poa_true(welfare_sw: f64, welfare_eq: f64) -> Result<f64> {
    if welfare_eq > 0.0 {
        Ok(welfare_sw / welfare_eq)
    } else {
        Err(Error::Domain(format!(
            "price of anarchy undefined: equilibrium welfare {welfare_eq} <= 0 (optimum {welfare_sw})"
        )))
    }
}

/// Closed-form ratio `1 + Σ α r (R_i - Nφ_i) / Σ [(r - b_i)²/(4a_i) - α r R_i]`
/// evaluated at the reported states, summed over clients and iterations.
pub fn poa_closed_form_mpp(report: &EquilibriumReport, model: &PropagationModel, roster: &Roster, alpha: f64) -> Result<f64> {
    let n = roster.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for s in &report.states {
        let risk = external_risk(model, &s.budgets)?;
        for (i, c) in roster.clients().iter().enumerate() {
            num += alpha * s.reward * (risk[i] - n * s.mean_field[i]);
            den += (s.reward - c.b).powi(2) / (4.0 * c.a) - alpha * s.reward * risk[i];
        }
    }
    if den == 0.0 {
        return Err(Error::Domain("closed-form price of anarchy undefined: zero denominator".into()));
    }
    Ok(1.0 + num / den)
}

/// `(m_l, m_h)`: extreme values of `(r - b_i)/(2a_i)` over clients and rewards.
pub fn reward_ratio_range(rewards: &[f64], roster: &Roster) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in rewards {
        for c in roster.clients() {
            let m = (r - c.b) / (2.0 * c.a);
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    (lo, hi)
}

fn contraction_factor(model: &PropagationModel, alpha: f64) -> Result<f64> {
    let alpha_s = alpha * model.bound();
    if alpha_s >= 1.0 {
        Err(Error::Domain(format!("need alpha*S < 1, got {alpha_s}")))
    } else {
        Ok(alpha_s)
    }
}

/// `ρ_l = (m_l - αS m_h)/(1 - α²S²)`, `ρ_h = (m_h - αS m_l)/(1 - α²S²)`.
pub fn feasible_bounds(rewards: &[f64], roster: &Roster, model: &PropagationModel, alpha: f64) -> Result<(f64, f64)> {
    let k = contraction_factor(model, alpha)?;
    let (ml, mh) = reward_ratio_range(rewards, roster);
    let d = 1.0 - k * k;
    Ok(((ml - k * mh) / d, (mh - k * ml) / d))
}

/// Lower bound `1/(1 - ε²)` on the social-agnostic price of anarchy, with
/// `ε = αS ω̃_min/(1 - α²S²) · (αS - m_l/m_h)`.
pub fn sa_lower_bound(model: &PropagationModel, roster: &Roster, rewards: &[f64], alpha: f64, w_min: f64) -> Result<f64> {
    let k = contraction_factor(model, alpha)?;
    let (ml, mh) = reward_ratio_range(rewards, roster);
    if mh <= 0.0 {
        return Err(Error::Domain(format!("need m_h > 0, got {mh}")));
    }
    Ok(sa_bound_formula(k, w_min, ml / mh))
}

fn sa_bound_formula(alpha_s: f64, w_min: f64, ratio: f64) -> f64 {
    let eps = alpha_s * w_min / (1.0 - alpha_s * alpha_s) * (alpha_s - ratio);
    1.0 / (1.0 - eps * eps)
}

/// Welfare and price-of-anarchy figures for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PoAReport {
    /// Optimal welfare at the MPP rewards.
    pub welfare_sw: f64,
    /// Optimal welfare at the social-agnostic rewards.
    pub welfare_sw_sa: f64,
    pub welfare_mpp: f64,
    pub welfare_sa: f64,
    pub poa_mpp_true: Option<f64>,
    pub poa_sa_true: Option<f64>,
    pub poa_mpp_closed_form: Option<f64>,
    pub sa_lower_bound: Option<f64>,
    /// The welfare optimum hit the budget floor somewhere.
    pub sw_clamped: bool,
}

/// Compares the equilibrium and the social-agnostic outcome against the
/// welfare optimum. Each scenario is measured against the optimum at its own
/// reward sequence.
pub fn price_of_anarchy(
    report: &EquilibriumReport,
    sa: &SaOutcome,
    model: &PropagationModel,
    roster: &Roster,
    alpha: f64,
    w_min: f64,
    floor: f64,
) -> Result<PoAReport> {
    let rewards = report.rewards();
    let (sw, clamped_mpp) = sw_optimum_path(&rewards, model, roster, alpha, floor)?;
    let (sw_sa, clamped_sa) = sw_optimum_path(&sa.rewards, model, roster, alpha, floor)?;
    let welfare_sw = social_welfare(&rewards, &sw, model, roster, alpha)?;
    let welfare_sw_sa = social_welfare(&sa.rewards, &sw_sa, model, roster, alpha)?;
    let welfare_sa = social_welfare(&sa.rewards, &sa.budgets, model, roster, alpha)?;
    Ok(PoAReport {
        welfare_sw,
        welfare_sw_sa,
        welfare_mpp: report.welfare,
        welfare_sa,
        poa_mpp_true: poa_true(welfare_sw, report.welfare).ok(),
        poa_sa_true: poa_true(welfare_sw_sa, welfare_sa).ok(),
        poa_mpp_closed_form: poa_closed_form_mpp(report, model, roster, alpha).ok(),
        sa_lower_bound: sa_lower_bound(model, roster, &sa.rewards, alpha, w_min).ok(),
        sw_clamped: clamped_mpp || clamped_sa,
    })
}
