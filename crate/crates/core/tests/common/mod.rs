#![allow(dead_code)]

use mppfl::graph::{generate_er_graph, propagation_coefficients, row_normalize, ErParams, PropagationModel};
use mppfl::mechanism::{ClientProfile, Roster, ServerModelParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random social graph pushed through normalization and propagation.
pub fn random_model<R: Rng>(rng: &mut R, n: usize, lambda: f64, hops: usize) -> PropagationModel {
    let params = ErParams {
        n,
        ..ErParams::default()
    };
    let g = generate_er_graph(&params, rng).unwrap();
    let w = row_normalize(&g, 0.0).unwrap();
    propagation_coefficients(&w, lambda, hops).unwrap()
}

/// Clients with `a, b ~ U[0.5, 1.5]` and sizes in `[20, 100]`.
pub fn random_roster<R: Rng>(rng: &mut R, n: usize) -> Roster {
    Roster::new(
        (0..n)
            .map(|_| {
                ClientProfile::new(
                    rng.random_range(0.5..1.5),
                    rng.random_range(0.5..1.5),
                    rng.random_range(20..=100),
                )
            })
            .collect(),
    )
    .unwrap()
}

/// A random instance with `αS < 1`.
pub struct Instance {
    pub model: PropagationModel,
    pub roster: Roster,
    pub server: ServerModelParams,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(10..=25);
    let lambda = r.random_range(0.2..0.8);
    let hops = r.random_range(1..=5);
    let model = random_model(&mut r, n, lambda, hops);
    let alpha = r.random_range(0.01..0.9) / model.bound();
    let roster = random_roster(&mut r, n);
    let server = ServerModelParams {
        alpha,
        tau: r.random_range(0.2..0.8),
        n_clients: n,
        ..ServerModelParams::default()
    };
    Instance { model, roster, server }
}

/// Golden-section maximization of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
