//! Scenario configuration.
//!
//! The file format is flat `section.key = value` lines (TOML syntax), e.g.
//!
//! ```text
//! graph.n = 20
//! propagation.hops = 5
//! server.alpha = 0.05
//! sweep.alpha = [0.01, 0.05, 0.1]
//! ```
//!
//! Every key is optional; unknown keys and duplicates are rejected. See
//! [`ScenarioConfig`] for the defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::equilibrium::SolverConfig;
use crate::error::{ConfigError, Error, Result};
use crate::flsim::{TaskParams, TrainingParams};
use crate::graph::ErParams;
use crate::mechanism::ServerModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub n: usize,
    pub p_low: f64,
    pub p_high: f64,
    pub w_low: f64,
    pub w_high: f64,
    /// Floor on normalized influence weights.
    pub w_min: f64,
}

impl Default for GraphSection {
    fn default() -> Self {
        let er = ErParams::default();
        GraphSection {
            n: er.n,
            p_low: er.p_low,
            p_high: er.p_high,
            w_low: er.w_low,
            w_high: er.w_high,
            w_min: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSection {
    pub lambda: f64,
    pub hops: usize,
}

impl Default for PropagationSection {
    fn default() -> Self {
        PropagationSection { lambda: 0.5, hops: 5 }
    }
}

/// Client economics. Explicit per-client lists override the sampled ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicsSection {
    pub a_low: f64,
    pub a_high: f64,
    pub b_low: f64,
    pub b_high: f64,
    pub data_low: u64,
    pub data_high: u64,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub data_sizes: Option<Vec<u64>>,
    pub kappa: f64,
    pub xi: f64,
    pub freq: f64,
    pub local_epochs: u32,
}

impl Default for EconomicsSection {
    fn default() -> Self {
        EconomicsSection {
            a_low: 0.5,
            a_high: 1.5,
            b_low: 0.5,
            b_high: 1.5,
            data_low: 20,
            data_high: 100,
            a: None,
            b: None,
            data_sizes: None,
            kappa: 0.0,
            xi: 0.0,
            freq: 0.0,
            local_epochs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub grad_bound: f64,
    pub clip: f64,
    pub dim: usize,
}

impl Default for ServerSection {
    fn default() -> Self {
        let s = ServerModelParams::default();
        ServerSection {
            tau: s.tau,
            alpha: s.alpha,
            beta: s.beta,
            mu: s.mu,
            grad_bound: s.grad_bound,
            clip: s.clip,
            dim: s.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub eps0: f64,
    pub max_rounds: usize,
    pub bracket_cap: f64,
    pub reward_tol: f64,
    pub rho_min: f64,
    pub clamp_infeasible: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSection {
            eps0: s.eps0,
            max_rounds: s.max_rounds,
            bracket_cap: s.bracket_cap,
            reward_tol: s.reward_tol,
            rho_min: s.rho_min,
            clamp_infeasible: s.clamp_infeasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub horizon: usize,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 1,
            horizon: 10,
            workers: 0,
        }
    }
}

/// Sweep grids per axis, plus the number of seeds per point (seeds are
/// `run.seed, run.seed + 1, ...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: usize,
    pub alpha: Vec<f64>,
    pub hops: Vec<usize>,
    pub n_clients: Vec<usize>,
    pub eps0: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            seeds: 5,
            alpha: vec![0.01, 0.05, 0.1],
            hops: vec![1, 2, 3, 4, 5],
            n_clients: vec![20, 50, 80],
            eps0: vec![1e-2, 1e-4, 1e-6, 1e-8],
        }
    }
}

/// Baseline strategies. Without an explicit range, RANDOM draws from the
/// instance's feasible budget interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub fixed_rho: f64,
    pub random_low: Option<f64>,
    pub random_high: Option<f64>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            fixed_rho: 1.0,
            random_low: None,
            random_high: None,
        }
    }
}

/// Federated training on a synthetic task. `lr` defaults to half the
/// largest stable step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlsimSection {
    pub enabled: bool,
    pub dim: usize,
    pub noise_std: f64,
    pub heterogeneity: f64,
    pub condition: f64,
    pub lr: Option<f64>,
    pub local_epochs: u32,
}

impl Default for FlsimSection {
    fn default() -> Self {
        let t = TaskParams::default();
        FlsimSection {
            enabled: false,
            dim: t.dim,
            noise_std: t.noise_std,
            heterogeneity: t.heterogeneity,
            condition: t.condition,
            lr: None,
            local_epochs: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub graph: GraphSection,
    pub propagation: PropagationSection,
    pub economics: EconomicsSection,
    pub server: ServerSection,
    pub solver: SolverSection,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub compare: CompareSection,
    pub flsim: FlsimSection,
}

fn invalid(field: &str, value: impl ToString, bound: &str) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        value: value.to_string(),
        bound: bound.to_string(),
    }
}

fn check(ok: bool, field: &str, value: impl ToString, bound: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, value, bound))
    }
}

fn check_range(field: &str, low: f64, high: f64, lo_ok: impl Fn(f64) -> bool, bound: &str) -> Result<(), ConfigError> {
    check(lo_ok(low), &format!("{field}_low"), low, bound)?;
    check(lo_ok(high), &format!("{field}_high"), high, bound)?;
    check(low <= high, &format!("{field}_high"), high, &format!("{field}_low ≤ {field}_high"))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    /// Parses config text without validating it.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    /// Checks every field against its domain.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.graph;
        check(g.n >= 2, "graph.n", g.n, "n ≥ 2")?;
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        check_range("graph.p", g.p_low, g.p_high, prob, "p ∈ [0,1]")?;
        check_range("graph.w", g.w_low, g.w_high, |v| v > 0.0 && v.is_finite(), "w > 0")?;
        check(
            g.w_min >= 0.0 && g.w_min * (g.n - 1) as f64 <= 1.0,
            "graph.w_min",
            g.w_min,
            "w_min ∈ [0, 1/(n−1)]",
        )?;

        let p = &self.propagation;
        check(p.lambda > 0.0 && p.lambda < 1.0, "propagation.lambda", p.lambda, "λ ∈ (0,1)")?;
        check(p.hops >= 1, "propagation.hops", p.hops, "K ≥ 1")?;

        let e = &self.economics;
        let pos = |v: f64| v > 0.0 && v.is_finite();
        check_range("economics.a", e.a_low, e.a_high, pos, "a > 0")?;
        check_range("economics.b", e.b_low, e.b_high, pos, "b > 0")?;
        check(e.data_low >= 1, "economics.data_low", e.data_low, "data_low ≥ 1")?;
        check(
            e.data_high >= e.data_low,
            "economics.data_high",
            e.data_high,
            "data_low ≤ data_high",
        )?;
        for (name, list) in [("economics.a", &e.a), ("economics.b", &e.b)] {
            if let Some(v) = list {
                check(v.len() == g.n, name, format!("{v:?}"), "one entry per client (graph.n)")?;
                if let Some(x) = v.iter().find(|&&x| !pos(x)) {
                    return Err(invalid(name, x, "every entry > 0"));
                }
            }
        }
        if let Some(v) = &e.data_sizes {
            check(v.len() == g.n, "economics.data_sizes", format!("{v:?}"), "one entry per client (graph.n)")?;
            check(v.iter().all(|&x| x >= 1), "economics.data_sizes", format!("{v:?}"), "every entry ≥ 1")?;
        }
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        check(nonneg(e.kappa), "economics.kappa", e.kappa, "κ ≥ 0")?;
        check(nonneg(e.xi), "economics.xi", e.xi, "ξ ≥ 0")?;
        check(nonneg(e.freq), "economics.freq", e.freq, "f ≥ 0")?;
        check(e.local_epochs >= 1, "economics.local_epochs", e.local_epochs, "L ≥ 1")?;

        let s = &self.server;
        check(s.tau > 0.0 && s.tau < 1.0, "server.tau", s.tau, "τ ∈ (0,1)")?;
        check(s.alpha > 0.0 && s.alpha < 1.0, "server.alpha", s.alpha, "α ∈ (0,1)")?;
        check(pos(s.beta), "server.beta", s.beta, "β > 0")?;
        check(pos(s.mu), "server.mu", s.mu, "μ > 0")?;
        check(pos(s.grad_bound), "server.grad_bound", s.grad_bound, "ℰ > 0")?;
        check(pos(s.clip), "server.clip", s.clip, "𝒮 > 0")?;
        check(s.dim >= 1, "server.dim", s.dim, "p ≥ 1")?;

        let v = &self.solver;
        check(pos(v.eps0), "solver.eps0", v.eps0, "ε₀ > 0")?;
        check(v.max_rounds >= 1, "solver.max_rounds", v.max_rounds, "max_rounds ≥ 1")?;
        check(pos(v.bracket_cap), "solver.bracket_cap", v.bracket_cap, "bracket_cap > 0")?;
        check(
            v.reward_tol > 0.0 && v.reward_tol < 1.0,
            "solver.reward_tol",
            v.reward_tol,
            "reward_tol ∈ (0,1)",
        )?;
        check(pos(v.rho_min), "solver.rho_min", v.rho_min, "ρ_min > 0")?;

        check(self.run.horizon >= 1, "run.horizon", self.run.horizon, "T ≥ 1")?;

        let w = &self.sweep;
        check(w.seeds >= 1, "sweep.seeds", w.seeds, "seeds ≥ 1")?;
        if let Some(x) = w.alpha.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(invalid("sweep.alpha", x, "α ∈ (0,1)"));
        }
        if w.hops.contains(&0) {
            return Err(invalid("sweep.hops", 0, "K ≥ 1"));
        }
        if let Some(x) = w.n_clients.iter().find(|&&x| x < 2) {
            return Err(invalid("sweep.n_clients", x, "n ≥ 2"));
        }
        if let Some(x) = w.eps0.iter().find(|&&x| !pos(x)) {
            return Err(invalid("sweep.eps0", x, "ε₀ > 0"));
        }
        if (e.a.is_some() || e.b.is_some() || e.data_sizes.is_some()) && !w.n_clients.is_empty() {
            // Explicit per-client lists pin the client count.
            if let Some(&x) = w.n_clients.iter().find(|&&x| x != g.n) {
                return Err(invalid("sweep.n_clients", x, "equal to graph.n when per-client lists are given"));
            }
        }

        let c = &self.compare;
        check(pos(c.fixed_rho), "compare.fixed_rho", c.fixed_rho, "fixed_rho > 0")?;
        match (c.random_low, c.random_high) {
            (None, None) => {}
            (Some(lo), Some(hi)) => {
                check(pos(lo), "compare.random_low", lo, "random_low > 0")?;
                check(hi >= lo && hi.is_finite(), "compare.random_high", hi, "random_low ≤ random_high")?;
            }
            (lo, _) => {
                let (field, value) = if lo.is_some() {
                    ("compare.random_high", "missing")
                } else {
                    ("compare.random_low", "missing")
                };
                return Err(invalid(field, value, "random_low and random_high set together"));
            }
        }

        let f = &self.flsim;
        check(f.dim >= 1, "flsim.dim", f.dim, "dim ≥ 1")?;
        check(nonneg(f.noise_std), "flsim.noise_std", f.noise_std, "noise_std ≥ 0")?;
        check(nonneg(f.heterogeneity), "flsim.heterogeneity", f.heterogeneity, "heterogeneity ≥ 0")?;
        check(
            f.condition >= 1.0 && f.condition.is_finite(),
            "flsim.condition",
            f.condition,
            "condition ≥ 1",
        )?;
        if let Some(lr) = f.lr {
            check(pos(lr), "flsim.lr", lr, "lr > 0")?;
        }
        check(f.local_epochs >= 1, "flsim.local_epochs", f.local_epochs, "local_epochs ≥ 1")?;
        Ok(())
    }

    /// Canonical serialization; two configs with equal values hash equally
    /// regardless of formatting.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Hex SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn er_params(&self) -> ErParams {
        let g = &self.graph;
        ErParams {
            n: g.n,
            p_low: g.p_low,
            p_high: g.p_high,
            w_low: g.w_low,
            w_high: g.w_high,
        }
    }

    pub fn server_params(&self) -> ServerModelParams {
        let s = &self.server;
        ServerModelParams {
            beta: s.beta,
            mu: s.mu,
            grad_bound: s.grad_bound,
            clip: s.clip,
            dim: s.dim,
            tau: s.tau,
            alpha: s.alpha,
            n_clients: self.graph.n,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            eps0: s.eps0,
            max_rounds: s.max_rounds,
            bracket_cap: s.bracket_cap,
            reward_tol: s.reward_tol,
            rho_min: s.rho_min,
            clamp_infeasible: s.clamp_infeasible,
        }
    }

    pub fn task_params(&self) -> TaskParams {
        let f = &self.flsim;
        TaskParams {
            dim: f.dim,
            noise_std: f.noise_std,
            heterogeneity: f.heterogeneity,
            condition: f.condition,
        }
    }

    /// Training parameters; `lr = None` leaves the step to the caller.
    pub fn training_params(&self, default_lr: f64) -> TrainingParams {
        TrainingParams {
            lr: self.flsim.lr.unwrap_or(default_lr),
            local_epochs: self.flsim.local_epochs,
            ..TrainingParams::default()
        }
    }
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg = ScenarioConfig::parse(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
