use crate::error::{Error, Result};
use crate::mechanism::ClientProfile;

/// Unconstrained maximizer of the mean-field utility:
/// `ρ* = (r - b)/(2a) - α N φ`.
pub fn best_response(r: f64, phi_i: f64, profile: &ClientProfile, alpha: f64, n: usize) -> f64 {
    (r - profile.b) / (2.0 * profile.a) - alpha * n as f64 * phi_i
}

/// [`best_response`] that reports clients pushed to or below the budget floor.
pub fn feasible_best_response(
    client: usize,
    r: f64,
    phi_i: f64,
    profile: &ClientProfile,
    alpha: f64,
    n: usize,
    rho_min: f64,
) -> Result<f64> {
    let rho = best_response(r, phi_i, profile, alpha, n);
    if rho <= rho_min {
        Err(Error::Infeasible {
            client,
            budget: rho,
            floor: rho_min,
        })
    } else {
        Ok(rho)
    }
}
