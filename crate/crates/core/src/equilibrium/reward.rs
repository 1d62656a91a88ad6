//! The leader's problem: pick the unit reward minimizing the server cost
//! when every client answers with its best response.

use crate::error::{Error, Result};
use crate::mechanism::Roster;

use super::response::best_response;
use super::SolverConfig;

/// Server cost as a function of the reward alone, with client budgets
/// substituted by their best responses at fixed mean-field estimates.
#[derive(Debug, Clone, Copy)]
pub struct InducedServerCost<'a> {
    pub phi: &'a [f64],
    pub eps: &'a [f64],
    pub roster: &'a Roster,
    pub tau: f64,
    pub alpha: f64,
    /// 1-based iteration index.
    pub t: usize,
}

impl InducedServerCost<'_> {
    fn n(&self) -> usize {
        self.roster.len()
    }

    /// Best-response budget of client `i` at reward `r`.
    pub fn budget(&self, i: usize, r: f64) -> f64 {
        best_response(r, self.phi[i], self.roster.get(i), self.alpha, self.n())
    }

    /// Smallest reward at which every best response reaches `floor`.
    pub fn reward_floor(&self, floor: f64) -> f64 {
        let n = self.n() as f64;
        self.roster
            .clients()
            .iter()
            .zip(self.phi)
            .map(|(c, &phi)| c.b + 2.0 * c.a * (self.alpha * n * phi + floor))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `U_t(r)` with `ρ_i = g_i(r)`.
    pub fn cost(&self, r: f64) -> f64 {
        let t = self.t as f64;
        let mut accuracy = 0.0;
        let mut payment = 0.0;
        for i in 0..self.n() {
            let g = self.budget(i, r);
            accuracy += self.eps[i] / (t * g);
            payment += r * g;
        }
        self.tau * accuracy + (1.0 - self.tau) * payment
    }

    /// Accuracy and payment parts of `dU_t/dr`; their sum is the derivative.
    fn derivative_parts(&self, r: f64) -> (f64, f64) {
        let t = self.t as f64;
        let n = self.n() as f64;
        let mut accuracy = 0.0;
        let mut payment = 0.0;
        for (i, c) in self.roster.clients().iter().enumerate() {
            let g = self.budget(i, r);
            accuracy -= self.eps[i] / (2.0 * t * c.a * g * g);
            payment += (2.0 * r - c.b) / (2.0 * c.a) - self.alpha * n * self.phi[i];
        }
        (self.tau * accuracy, (1.0 - self.tau) * payment)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let (acc, pay) = self.derivative_parts(r);
        acc + pay
    }

    /// Derivative divided by the magnitude of its two competing terms.
    pub fn scaled_derivative(&self, r: f64) -> f64 {
        let (acc, pay) = self.derivative_parts(r);
        (acc + pay) / (acc.abs() + pay.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        let t = self.t as f64;
        let mut accuracy = 0.0;
        let mut payment = 0.0;
        for (i, c) in self.roster.clients().iter().enumerate() {
            let g = self.budget(i, r);
            accuracy += self.eps[i] / (2.0 * t * c.a * c.a * g.powi(3));
            payment += 1.0 / c.a;
        }
        self.tau * accuracy + (1.0 - self.tau) * payment
    }

    /// Root of the first-order condition on `(r_floor, ∞)`.
    ///
    /// The derivative increases strictly on the feasible domain and tends to
    /// `-∞` at the left end, so bracketing then bisecting always converges.
    /// A few guarded Newton steps finish the job once the bracket is tight.
    pub fn minimize(&self, solver: &SolverConfig) -> Result<f64> {
        let lo0 = self.reward_floor(solver.rho_min);
        if !lo0.is_finite() {
            return Err(Error::Solver(format!("reward floor is not finite ({lo0})")));
        }
        if self.derivative(lo0) >= 0.0 {
            // Budgets are pinned at the floor; the cost rises from here on.
            return Ok(lo0);
        }
        let mut lo = lo0;
        let mut step = lo0.abs().max(1.0);
        let mut hi = lo0 + step;
        while self.derivative(hi) <= 0.0 {
            lo = hi;
            step *= 2.0;
            hi = lo0 + step;
            if hi > solver.bracket_cap {
                return Err(Error::Solver(format!(
                    "reward bracket exceeded cap {:e} at t = {}",
                    solver.bracket_cap, self.t
                )));
            }
        }
        while hi - lo > solver.reward_tol * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.derivative(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..4 {
            let d = self.derivative(r);
            if d == 0.0 {
                break;
            }
            if d > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let next = r - d / self.second_derivative(r);
            if !(next > lo && next < hi) {
                break;
            }
            r = next;
        }
        Ok(r)
    }
}

/// Optimal unit reward for iteration `t` given mean-field estimates `φ`.
pub fn solve_unit_reward(
    phi: &[f64],
    eps: &[f64],
    roster: &Roster,
    tau: f64,
    alpha: f64,
    t: usize,
    solver: &SolverConfig,
) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::param("tau", format!("must lie in (0, 1), got {tau}")));
    }
    if t == 0 {
        return Err(Error::Domain("iteration index is 1-based; t = 0 is undefined".into()));
    }
    if phi.len() != roster.len() || eps.len() != roster.len() {
        return Err(Error::param("phi", "φ and ε must have one entry per client"));
    }
    InducedServerCost {
        phi,
        eps,
        roster,
        tau,
        alpha,
        t,
    }
    .minimize(solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::ClientProfile;
    use crate::rng::{stream, Domain};
    use rand::Rng;

    fn instance(seed: u64) -> (Roster, Vec<f64>, Vec<f64>, f64, f64, usize) {
        let mut rng = stream(seed, Domain::Initialization, 99);
        let n = rng.random_range(2..12);
        let roster = Roster::new(
            (0..n)
                .map(|_| ClientProfile::new(rng.random_range(0.5..1.5), rng.random_range(0.5..1.5), 10))
                .collect(),
        )
        .unwrap();
        let phi = (0..n).map(|_| rng.random_range(0.0..0.1)).collect();
        let eps = (0..n).map(|_| rng.random_range(1e-3..1.0)).collect();
        (roster, phi, eps, rng.random_range(0.1..0.9), rng.random_range(0.01..0.1), rng.random_range(1..10))
    }

    #[test]
    fn root_condition_and_convexity() {
        let solver = SolverConfig::default();
        for seed in 0..50 {
            let (roster, phi, eps, tau, alpha, t) = instance(seed);
            let p = InducedServerCost { phi: &phi, eps: &eps, roster: &roster, tau, alpha, t };
            let r = solve_unit_reward(&phi, &eps, &roster, tau, alpha, t, &solver).unwrap();
            assert!(r > p.reward_floor(0.0));
            assert!(p.scaled_derivative(r).abs() <= 1e-8, "seed {seed}: {}", p.scaled_derivative(r));
            assert!(p.second_derivative(r) > 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for seed in 0..20 {
            let (roster, phi, eps, tau, alpha, t) = instance(seed);
            let p = InducedServerCost { phi: &phi, eps: &eps, roster: &roster, tau, alpha, t };
            let r = p.reward_floor(0.0) + 0.3;
            let h = 1e-6;
            let fd1 = (p.cost(r + h) - p.cost(r - h)) / (2.0 * h);
            let fd2 = (p.derivative(r + h) - p.derivative(r - h)) / (2.0 * h);
            assert!((fd1 - p.derivative(r)).abs() <= 1e-5 * (1.0 + fd1.abs()));
            assert!((fd2 - p.second_derivative(r)).abs() <= 1e-5 * (1.0 + fd2.abs()));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (roster, phi, eps, _, alpha, _) = instance(1);
        let s = SolverConfig::default();
        assert!(solve_unit_reward(&phi, &eps, &roster, 1.0, alpha, 1, &s).is_err());
        assert!(solve_unit_reward(&phi, &eps, &roster, 0.5, alpha, 0, &s).is_err());
        assert!(solve_unit_reward(&phi[..1], &eps, &roster, 0.5, alpha, 1, &s).is_err());
    }

    #[test]
    fn bracket_cap_is_enforced() {
        let (roster, phi, eps, _, alpha, _) = instance(2);
        let s = SolverConfig { bracket_cap: 1.0, ..SolverConfig::default() };
        // τ close to one makes the accuracy term dominate and pushes r* up.
        let eps: Vec<f64> = eps.iter().map(|e| e * 1e6).collect();
        assert!(matches!(
            solve_unit_reward(&phi, &eps, &roster, 0.99, alpha, 1, &s),
            Err(Error::Solver(_))
        ));
    }
}
