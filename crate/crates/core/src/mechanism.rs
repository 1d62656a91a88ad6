//! Closed-form pieces of the incentive mechanism: zCDP noise calibration,
//! the accuracy-loss bound, server cost, client utilities and social welfare.

use crate::error::{Error, Result};
use crate::graph::{external_risk, PropagationModel};

/// Economic and differential-privacy parameters of one client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientProfile {
    /// Quadratic privacy-cost coefficient.
    pub a: f64,
    /// Linear privacy-cost coefficient.
    pub b: f64,
    /// Local dataset size `|D_i|`.
    pub data_size: u64,
    /// Aggregation weight; filled in by [`Roster::new`].
    pub theta: f64,
    /// CPU architecture factor.
    pub kappa: f64,
    /// CPU cycles per sample.
    pub xi: f64,
    /// Clock frequency.
    pub freq: f64,
    pub local_epochs: u32,
}

impl ClientProfile {
    /// Profile with zero computation cost.
    pub fn new(a: f64, b: f64, data_size: u64) -> Self {
        ClientProfile {
            a,
            b,
            data_size,
            theta: 0.0,
            kappa: 0.0,
            xi: 0.0,
            freq: 0.0,
            local_epochs: 1,
        }
    }
}

/// Clients with aggregation weights `θ_i = |D_i| / Σ_j |D_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    clients: Vec<ClientProfile>,
}

impl Roster {
    pub fn new(mut clients: Vec<ClientProfile>) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::param("roster", "no clients"));
        }
        for (i, c) in clients.iter().enumerate() {
            if !(c.a > 0.0 && c.a.is_finite()) || !(c.b > 0.0 && c.b.is_finite()) {
                return Err(Error::Structural {
                    client: i,
                    reason: format!("cost coefficients must be positive, got a = {}, b = {}", c.a, c.b),
                });
            }
            if c.data_size == 0 {
                return Err(Error::Structural {
                    client: i,
                    reason: "data size must be positive".into(),
                });
            }
            if [c.kappa, c.xi, c.freq].iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::Structural {
                    client: i,
                    reason: "computation-cost factors must be nonnegative".into(),
                });
            }
        }
        let total: f64 = clients.iter().map(|c| c.data_size as f64).sum();
        for c in &mut clients {
            c.theta = c.data_size as f64 / total;
        }
        Ok(Roster { clients })
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    pub fn clients(&self) -> &[ClientProfile] {
        &self.clients
    }

    pub fn get(&self, i: usize) -> &ClientProfile {
        &self.clients[i]
    }

    /// Per-client accuracy weights `ε_i`.
    pub fn epsilons(&self, params: &ServerModelParams) -> Result<Vec<f64>> {
        self.clients
            .iter()
            .map(|c| epsilon_i(params, c.theta, c.data_size))
            .collect()
    }
}

/// Server-side model and cost constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerModelParams {
    /// Smoothness constant.
    pub beta: f64,
    /// Polyak–Łojasiewicz constant.
    pub mu: f64,
    /// Bound on the global gradient norm.
    pub grad_bound: f64,
    /// Update clipping threshold.
    pub clip: f64,
    /// Model dimension.
    pub dim: usize,
    /// Weight of the accuracy term in the server cost.
    pub tau: f64,
    /// Discount on external privacy risk.
    pub alpha: f64,
    pub n_clients: usize,
}

impl Default for ServerModelParams {
    fn default() -> Self {
        ServerModelParams {
            beta: 1.0,
            mu: 1.0,
            grad_bound: 1.0,
            clip: 1.0,
            dim: 1,
            tau: 0.5,
            alpha: 0.05,
            n_clients: 20,
        }
    }
}

impl ServerModelParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must lie in (0, 1), got {v}")))
            }
        };
        open_unit("tau", self.tau)?;
        open_unit("alpha", self.alpha)?;
        for (name, v) in [
            ("beta", self.beta),
            ("mu", self.mu),
            ("grad_bound", self.grad_bound),
            ("clip", self.clip),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        if self.n_clients == 0 {
            return Err(Error::param("n_clients", "must be positive"));
        }
        Ok(())
    }
}

/// Strategy state of one iteration. `t` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub t: usize,
    pub reward: f64,
    pub budgets: Vec<f64>,
    pub mean_field: Vec<f64>,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Budgets may be `+∞` (noise switched off).
fn positive_budget(rho: f64) -> Result<()> {
    if rho > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("rho must be positive, got {rho}")))
    }
}

fn check_iteration(t: usize) -> Result<()> {
    if t == 0 {
        Err(Error::Domain("iteration index is 1-based; t = 0 is undefined".into()))
    } else {
        Ok(())
    }
}

/// Gaussian-mechanism variance for `ρ`-zCDP with clipped updates:
/// `δ² = 2𝒮² / (|D|² ρ)`. An infinite budget gives zero variance.
pub fn noise_variance(clip: f64, data_size: u64, rho: f64) -> Result<f64> {
    positive("clip", clip)?;
    positive_budget(rho)?;
    if data_size == 0 {
        return Err(Error::Domain("data size must be positive".into()));
    }
    let d = data_size as f64;
    Ok(2.0 * clip * clip / (d * d * rho))
}

/// `ε_i = p β 𝒮² θ_i² / (μ² |D_i|²)`.
pub fn epsilon_i(params: &ServerModelParams, theta: f64, data_size: u64) -> Result<f64> {
    positive("theta", theta)?;
    positive("beta", params.beta)?;
    positive("mu", params.mu)?;
    positive("clip", params.clip)?;
    if data_size == 0 || params.dim == 0 {
        return Err(Error::Domain("data size and dimension must be positive".into()));
    }
    let d = data_size as f64;
    Ok(params.dim as f64 * params.beta * params.clip.powi(2) * theta * theta / (params.mu.powi(2) * d * d))
}

fn client_accuracy_term(eps: &[f64], rho: &[f64], t: usize) -> Result<f64> {
    if eps.len() != rho.len() {
        return Err(Error::param("rho", "length must match the ε vector"));
    }
    let t = t as f64;
    rho.iter().zip(eps).try_fold(0.0, |acc, (&r, &e)| {
        positive_budget(r)?;
        Ok(acc + e / (t * r))
    })
}

/// Upper bound on the expected excess loss at iteration `t`:
/// `βℰ²/(2μ²t) + Σ_i ε_i/(t ρ_i)`.
pub fn accuracy_loss_bound(t: usize, params: &ServerModelParams, eps: &[f64], rho: &[f64]) -> Result<f64> {
    check_iteration(t)?;
    let noiseless = params.beta * params.grad_bound.powi(2) / (2.0 * params.mu.powi(2) * t as f64);
    Ok(noiseless + client_accuracy_term(eps, rho, t)?)
}

/// `s_i = ρ_i + α R_i`.
pub fn composite_risk(rho_i: f64, alpha: f64, risk_i: f64) -> f64 {
    rho_i + alpha * risk_i
}

/// `C_i = κ ξ f |D| L`.
pub fn computation_cost(profile: &ClientProfile) -> f64 {
    profile.kappa * profile.xi * profile.freq * profile.data_size as f64 * profile.local_epochs as f64
}

fn privacy_cost(profile: &ClientProfile, s: f64) -> f64 {
    profile.a * s * s + profile.b * s
}

/// Client utility with the exact external risk `R_i`.
pub fn client_utility(r: f64, rho_i: f64, risk_i: f64, profile: &ClientProfile, alpha: f64) -> f64 {
    let s = composite_risk(rho_i, alpha, risk_i);
    r * rho_i - computation_cost(profile) - privacy_cost(profile, s)
}

/// Client utility with `R_i` replaced by its mean-field estimate `N φ_i`.
pub fn client_utility_mf(r: f64, rho_i: f64, phi_i: f64, profile: &ClientProfile, alpha: f64, n: usize) -> f64 {
    client_utility(r, rho_i, n as f64 * phi_i, profile, alpha)
}

/// `U_t = τ Σ ε_i/(t ρ_i) + (1-τ) Σ r ρ_i`.
pub fn server_cost(r: f64, rho: &[f64], eps: &[f64], tau: f64, t: usize) -> Result<f64> {
    check_iteration(t)?;
    let accuracy = client_accuracy_term(eps, rho, t)?;
    let payment: f64 = rho.iter().map(|&p| r * p).sum();
    Ok(tau * accuracy + (1.0 - tau) * payment)
}

/// Welfare of one iteration: `Σ_i [r ρ_i - (a_i s_i² + b_i s_i)]` with the
/// exact external risk. Computation cost is not part of welfare.
pub fn iteration_welfare(r: f64, rho: &[f64], model: &PropagationModel, roster: &Roster, alpha: f64) -> Result<f64> {
    if rho.len() != roster.len() {
        return Err(Error::param("rho", "length must match the roster"));
    }
    let risk = external_risk(model, rho)?;
    Ok(roster
        .clients()
        .iter()
        .zip(rho.iter().zip(&risk))
        .map(|(c, (&p, &rk))| r * p - privacy_cost(c, composite_risk(p, alpha, rk)))
        .sum())
}

/// Cumulative welfare over aligned reward and budget sequences.
pub fn social_welfare(
    rewards: &[f64],
    budgets: &[Vec<f64>],
    model: &PropagationModel,
    roster: &Roster,
    alpha: f64,
) -> Result<f64> {
    if rewards.len() != budgets.len() {
        return Err(Error::param(
            "budgets",
            format!("{} reward entries but {} budget vectors", rewards.len(), budgets.len()),
        ));
    }
    rewards
        .iter()
        .zip(budgets)
        .try_fold(0.0, |acc, (&r, rho)| Ok(acc + iteration_welfare(r, rho, model, roster, alpha)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn unit_profile() -> ClientProfile {
        ClientProfile::new(1.0, 1.0, 1)
    }

    fn two_cycle() -> PropagationModel {
        PropagationModel::from_sigma(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), 0.5, 1).unwrap()
    }

    #[test]
    fn noise_variance_examples() {
        assert_eq!(noise_variance(1.0, 1, 2.0).unwrap(), 1.0);
        // 2·100 / (10⁴ · 0.5) = 0.04
        assert!((noise_variance(10.0, 100, 0.5).unwrap() - 0.04).abs() < 1e-17);
        let v = noise_variance(3.0, 7, 0.3).unwrap();
        assert_eq!(noise_variance(3.0, 7, 0.6).unwrap(), v / 2.0);
        assert!(matches!(noise_variance(1.0, 1, 0.0), Err(Error::Domain(_))));
        assert!(noise_variance(1.0, 1, -1.0).is_err());
        assert!(noise_variance(1.0, 1, f64::NAN).is_err());
        assert_eq!(noise_variance(1.0, 1, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn epsilon_examples() {
        let ones = ServerModelParams { dim: 1, beta: 1.0, clip: 1.0, mu: 1.0, ..Default::default() };
        assert_eq!(epsilon_i(&ones, 1.0, 1).unwrap(), 1.0);
        let e = epsilon_i(&ones, 0.3, 4).unwrap();
        assert!((epsilon_i(&ones, 0.6, 4).unwrap() - 4.0 * e).abs() < 1e-15);
        let p = ServerModelParams { dim: 10, beta: 2.0, clip: 5.0, mu: 2.0, ..Default::default() };
        // 10·2·25·0.01 / (4·2500) = 5e-4
        assert!((epsilon_i(&p, 0.1, 50).unwrap() - 5e-4).abs() < 1e-17);
    }

    #[test]
    fn accuracy_bound_examples() {
        let p = ServerModelParams::default();
        assert!((accuracy_loss_bound(1, &p, &[1.0], &[1.0]).unwrap() - 1.5).abs() < 1e-15);
        let huge = accuracy_loss_bound(4, &p, &[1.0, 2.0], &[1e300, 1e300]).unwrap();
        assert!((huge - 1.0 / 8.0).abs() < 1e-15);
        let lo = accuracy_loss_bound(3, &p, &[0.2, 0.5], &[0.4, 0.8]).unwrap();
        let hi = accuracy_loss_bound(3, &p, &[0.2, 0.5], &[0.2, 0.4]).unwrap();
        assert!(lo < hi);
        assert!(matches!(accuracy_loss_bound(0, &p, &[1.0], &[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn composite_and_computation_cost() {
        assert_eq!(composite_risk(0.7, 0.0, 5.0), 0.7);
        assert!((composite_risk(1.0, 0.1, 2.0) - 1.2).abs() < 1e-15);
        assert!(composite_risk(1.0, 0.1, 2.1) > composite_risk(1.0, 0.1, 2.0));

        let mut c = ClientProfile { kappa: 1.0, xi: 1.0, freq: 1.0, local_epochs: 5, ..ClientProfile::new(1.0, 1.0, 100) };
        assert_eq!(computation_cost(&c), 500.0);
        c.local_epochs = 10;
        assert_eq!(computation_cost(&c), 1000.0);
        c.freq = 0.0;
        assert_eq!(computation_cost(&c), 0.0);
    }

    #[test]
    fn utility_examples() {
        let p = unit_profile();
        assert!(client_utility(0.0, 1e-12, 0.0, &p, 0.1).abs() < 1e-11);
        // C = 0.5: κξf|D|L = 0.5
        let with_cost = ClientProfile { kappa: 0.5, xi: 1.0, freq: 1.0, local_epochs: 1, ..p.clone() };
        assert!((client_utility(3.0, 1.0, 0.0, &with_cost, 0.1) - 0.5).abs() < 1e-15);
        // s = 0.9 + 0.1·2·0.45 = 0.99, Û = 2.7 − (0.9801 + 0.99) = 0.7299
        assert!((client_utility_mf(3.0, 0.9, 0.45, &p, 0.1, 2) - 0.7299).abs() < 1e-12);
        assert_eq!(
            client_utility_mf(3.0, 0.9, 0.0, &p, 0.1, 2),
            3.0 * 0.9 - (0.81 + 0.9)
        );
    }

    #[test]
    fn server_cost_examples() {
        assert!((server_cost(2.0, &[1.0], &[1.0], 0.5, 1).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(server_cost(9.0, &[0.5, 2.0], &[1.0, 1.0], 1.0, 2).unwrap(), 1.0 + 0.25);
        assert!(server_cost(1.0, &[1e-12], &[1.0], 0.5, 1).unwrap() > 1e11);
        assert!(server_cost(1.0, &[1.0], &[1.0], 0.5, 0).is_err());
        assert!(server_cost(1.0, &[0.0], &[1.0], 0.5, 1).is_err());
    }

    #[test]
    fn welfare_examples() {
        let roster = Roster::new(vec![unit_profile(), unit_profile()]).unwrap();
        let m = two_cycle();
        // s = 1.1 each: 2·(3 − 1.21 − 1.1) = 1.38
        let w = social_welfare(&[3.0], &[vec![1.0, 1.0]], &m, &roster, 0.1).unwrap();
        assert!((w - 1.38).abs() < 1e-12);
        assert_eq!(social_welfare(&[3.0], &[vec![0.0, 0.0]], &m, &roster, 0.1).unwrap(), 0.0);

        let zero = PropagationModel::from_sigma(DMatrix::zeros(2, 2), 0.5, 1).unwrap();
        let w = social_welfare(&[2.0], &[vec![0.5, 0.25]], &zero, &roster, 0.1).unwrap();
        let expect = (2.0 * 0.5 - 0.25 - 0.5) + (2.0 * 0.25 - 0.0625 - 0.25);
        assert!((w - expect).abs() < 1e-15);
        assert!(social_welfare(&[1.0, 2.0], &[vec![1.0, 1.0]], &m, &roster, 0.1).is_err());
    }

    #[test]
    fn welfare_ignores_computation_cost_but_utility_does_not() {
        let cheap = Roster::new(vec![unit_profile(), unit_profile()]).unwrap();
        let pricey_client = ClientProfile { kappa: 2.0, xi: 3.0, freq: 4.0, ..unit_profile() };
        let pricey = Roster::new(vec![pricey_client.clone(), pricey_client.clone()]).unwrap();
        let m = two_cycle();
        let a = social_welfare(&[3.0], &[vec![0.8, 0.6]], &m, &cheap, 0.1).unwrap();
        let b = social_welfare(&[3.0], &[vec![0.8, 0.6]], &m, &pricey, 0.1).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            client_utility(3.0, 0.8, 0.6, &unit_profile(), 0.1),
            client_utility(3.0, 0.8, 0.6, &pricey_client, 0.1)
        );
    }

    #[test]
    fn roster_weights_sum_to_one() {
        let r = Roster::new((1..=7).map(|k| ClientProfile::new(1.0, 1.0, k * 13)).collect()).unwrap();
        let sum: f64 = r.clients().iter().map(|c| c.theta).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(Roster::new(vec![ClientProfile::new(0.0, 1.0, 1)]).is_err());
        assert!(Roster::new(vec![ClientProfile::new(1.0, 1.0, 0)]).is_err());
    }

    #[test]
    fn server_params_validation() {
        assert!(ServerModelParams::default().validate().is_ok());
        assert!(ServerModelParams { alpha: 1.5, ..Default::default() }.validate().is_err());
        assert!(ServerModelParams { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(ServerModelParams { mu: -1.0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn mean_field_utility_matches_exact_at_consistency(
            r in 0.0f64..10.0, rho in 1e-3f64..5.0, risk in 0.0f64..5.0,
            a in 0.1f64..3.0, b in 0.1f64..3.0, alpha in 0.01f64..0.99, n in 1usize..100,
        ) {
            let p = ClientProfile::new(a, b, 10);
            let exact = client_utility(r, rho, risk, &p, alpha);
            let mf = client_utility_mf(r, rho, risk / n as f64, &p, alpha, n);
            prop_assert!((exact - mf).abs() <= 1e-12 * (1.0 + exact.abs()));
        }

        #[test]
        fn utility_strictly_concave_in_budget(
            r in 0.0f64..10.0, rho in 0.01f64..5.0, h in 1e-3f64..0.5, phi in 0.0f64..1.0,
            a in 0.1f64..3.0, b in 0.1f64..3.0, alpha in 0.01f64..0.99,
        ) {
            let p = ClientProfile::new(a, b, 10);
            let u = |x| client_utility_mf(r, x, phi, &p, alpha, 20);
            prop_assert!(u(rho + h) - 2.0 * u(rho) + u(rho - h) < 0.0);
        }

        #[test]
        fn server_cost_convex_in_each_budget(
            r in 0.1f64..10.0, x in 0.05f64..3.0, h in 1e-3f64..0.04, other in 0.05f64..3.0,
            e1 in 1e-4f64..1.0, e2 in 1e-4f64..1.0, tau in 0.01f64..0.99, t in 1usize..20,
        ) {
            let f = |v: f64| server_cost(r, &[v, other], &[e1, e2], tau, t).unwrap();
            prop_assert!(f(x + h) - 2.0 * f(x) + f(x - h) > 0.0);
        }
    }
}
