//! Scenario runs, parameter sweeps, strategy comparisons and the run
//! directory writer.
//!
//! Randomness per scenario is keyed by the seed alone: the graph, the client
//! economics and the synthetic task for seed `s` are the same at every sweep
//! point, so differences along an axis come from the swept field only.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::equilibrium::{
    fixed_point, price_of_anarchy, sa_equilibrium_path, EquilibriumReport, PoAReport, RewardPolicy, SaOutcome,
};
use crate::error::{ConfigError, Error, Result, Stage, StageExt};
use crate::flsim::{run_federated, SyntheticTask, TrainingTrace};
use crate::graph::{generate_er_graph, propagation_coefficients, row_normalize, PropagationModel, RowStochasticMatrix, WeightedDigraph};
use crate::mechanism::{server_cost, social_welfare, ClientProfile, Roster};
use crate::rng::{stream, Domain, RNG_ALGORITHM};

/// Graph, propagation model and clients for one seed.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub graph: WeightedDigraph,
    pub influence: RowStochasticMatrix,
    pub model: PropagationModel,
    pub roster: Roster,
}

/// Samples client economics: `a_i`, `b_i` uniform on their ranges and data
/// sizes uniform on `[data_low, data_high]`, unless given explicitly.
pub fn sample_roster(cfg: &ScenarioConfig, seed: u64) -> Result<Roster> {
    let e = &cfg.economics;
    let n = cfg.graph.n;
    let mut rng = stream(seed, Domain::Economics, 0);
    let mut uniform = |lo: f64, hi: f64| if lo == hi { lo } else { rng.random_range(lo..hi) };
    let a: Vec<f64> = (0..n).map(|_| uniform(e.a_low, e.a_high)).collect();
    let b: Vec<f64> = (0..n).map(|_| uniform(e.b_low, e.b_high)).collect();
    let sizes: Vec<u64> = (0..n).map(|_| rng.random_range(e.data_low..=e.data_high)).collect();
    let a = e.a.clone().unwrap_or(a);
    let b = e.b.clone().unwrap_or(b);
    let sizes = e.data_sizes.clone().unwrap_or(sizes);
    Roster::new(
        (0..n)
            .map(|i| ClientProfile {
                kappa: e.kappa,
                xi: e.xi,
                freq: e.freq,
                local_epochs: e.local_epochs,
                ..ClientProfile::new(a[i], b[i], sizes[i])
            })
            .collect(),
    )
}

pub fn build_instance(cfg: &ScenarioConfig, seed: u64) -> Result<Instance> {
    let graph = generate_er_graph(&cfg.er_params(), &mut stream(seed, Domain::Graph, 0)).stage(Stage::Graph)?;
    let influence = row_normalize(&graph, cfg.graph.w_min).stage(Stage::Graph)?;
    let model = propagation_coefficients(&influence, cfg.propagation.lambda, cfg.propagation.hops)
        .stage(Stage::Propagation)?;
    let roster = sample_roster(cfg, seed).stage(Stage::Roster)?;
    Ok(Instance {
        seed,
        graph,
        influence,
        model,
        roster,
    })
}

/// Everything computed for one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub instance: Instance,
    pub equilibrium: EquilibriumReport,
    pub sa: SaOutcome,
    pub poa: PoAReport,
    pub trace: Option<TrainingTrace>,
}

impl ScenarioOutcome {
    /// Server cost summed over iterations.
    pub fn server_cost(&self) -> f64 {
        self.equilibrium.server_costs.iter().sum()
    }

    pub fn summary(&self) -> PointSummary {
        PointSummary {
            server_cost: self.server_cost(),
            welfare_mpp: self.poa.welfare_mpp,
            welfare_sa: self.poa.welfare_sa,
            welfare_sw: self.poa.welfare_sw,
            poa_mpp_true: self.poa.poa_mpp_true,
            poa_sa_true: self.poa.poa_sa_true,
            poa_mpp_closed_form: self.poa.poa_mpp_closed_form,
            rounds: self.equilibrium.rounds,
            converged: self.equilibrium.converged,
        }
    }
}

/// Trains on a synthetic task sized by the roster's data sizes.
pub fn run_training(cfg: &ScenarioConfig, instance: &Instance, budgets: &[Vec<f64>]) -> Result<TrainingTrace> {
    let sizes: Vec<u64> = instance.roster.clients().iter().map(|c| c.data_size).collect();
    let task = SyntheticTask::generate(&cfg.task_params(), &sizes, &mut stream(instance.seed, Domain::Task, 0))?;
    let training = cfg.training_params(0.5 * task.stable_lr());
    run_federated(
        &task,
        &instance.roster,
        budgets,
        &training,
        &cfg.server_params(),
        instance.seed,
    )
}

/// Equilibrium, social-agnostic baseline, welfare optimum and price of
/// anarchy for `cfg.run.seed`, plus training when `flsim.enabled`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let instance = build_instance(cfg, cfg.run.seed)?;
    let server = cfg.server_params();
    let solver = cfg.solver_config();
    let (model, roster) = (&instance.model, &instance.roster);

    let equilibrium = fixed_point(model, roster, &server, cfg.run.horizon, RewardPolicy::Optimize, &solver, None)
        .stage(Stage::FixedPoint)?;
    let sa = sa_equilibrium_path(roster, &server, cfg.run.horizon, &solver).stage(Stage::SocialAgnostic)?;
    let poa = price_of_anarchy(&equilibrium, &sa, model, roster, server.alpha, cfg.graph.w_min, solver.rho_min)
        .stage(Stage::PriceOfAnarchy)?;
    let trace = if cfg.flsim.enabled {
        Some(run_training(cfg, &instance, &equilibrium.budgets()).stage(Stage::Training)?)
    } else {
        None
    };
    Ok(ScenarioOutcome {
        instance,
        equilibrium,
        sa,
        poa,
        trace,
    })
}

/// Per-point figures reported by sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub server_cost: f64,
    pub welfare_mpp: f64,
    pub welfare_sa: f64,
    pub welfare_sw: f64,
    pub poa_mpp_true: Option<f64>,
    pub poa_sa_true: Option<f64>,
    pub poa_mpp_closed_form: Option<f64>,
    pub rounds: usize,
    pub converged: bool,
}

type MetricFn = fn(&PointSummary) -> Option<f64>;

/// Metrics aggregated by [`SweepResult::aggregate`], in output order.
pub const SWEEP_METRICS: &[(&str, MetricFn)] = &[
    ("server_cost", |p| Some(p.server_cost)),
    ("welfare_mpp", |p| Some(p.welfare_mpp)),
    ("welfare_sa", |p| Some(p.welfare_sa)),
    ("welfare_sw", |p| Some(p.welfare_sw)),
    ("poa_mpp_true", |p| p.poa_mpp_true),
    ("poa_sa_true", |p| p.poa_sa_true),
    ("poa_mpp_closed_form", |p| p.poa_mpp_closed_form),
    ("rounds", |p| Some(p.rounds as f64)),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Alpha,
    Hops,
    NClients,
    Eps0,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Hops => "hops",
            SweepAxis::NClients => "n_clients",
            SweepAxis::Eps0 => "eps0",
        }
    }

    /// Grid configured for this axis.
    pub fn configured_values(self, cfg: &ScenarioConfig) -> Vec<f64> {
        let w = &cfg.sweep;
        match self {
            SweepAxis::Alpha => w.alpha.clone(),
            SweepAxis::Hops => w.hops.iter().map(|&k| k as f64).collect(),
            SweepAxis::NClients => w.n_clients.iter().map(|&n| n as f64).collect(),
            SweepAxis::Eps0 => w.eps0.clone(),
        }
    }

    /// Copy of `cfg` with this axis set to `value`; nothing else changes.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, ConfigError> {
        let integral = |v: f64| -> Result<usize, ConfigError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(ConfigError::Invalid {
                    field: format!("sweep.{}", self.name()),
                    value: v.to_string(),
                    bound: "a nonnegative integer".into(),
                })
            }
        };
        let mut out = cfg.clone();
        match self {
            SweepAxis::Alpha => out.server.alpha = value,
            SweepAxis::Hops => out.propagation.hops = integral(value)?,
            SweepAxis::NClients => out.graph.n = integral(value)?,
            SweepAxis::Eps0 => out.solver.eps0 = value,
        }
        out.validate()?;
        Ok(out)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "hops" => Ok(SweepAxis::Hops),
            "n_clients" => Ok(SweepAxis::NClients),
            "eps0" => Ok(SweepAxis::Eps0),
            other => Err(ConfigError::Invalid {
                field: "axis".into(),
                value: other.into(),
                bound: "one of alpha, hops, n_clients, eps0".into(),
            }),
        }
    }
}

/// One `(value, seed)` point. Failures are kept as their message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub result: std::result::Result<PointSummary, String>,
}

/// Mean and sample standard deviation over successful seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Ascending.
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Ordered by value, then by seed.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Per-value statistics of `metric` (a name from [`SWEEP_METRICS`]).
    pub fn aggregate(&self, metric: &str) -> Option<Vec<Aggregate>> {
        let (_, get) = SWEEP_METRICS.iter().find(|(name, _)| *name == metric)?;
        Some(
            self.values
                .iter()
                .map(|&v| {
                    let xs: Vec<f64> = self
                        .rows
                        .iter()
                        .filter(|r| r.value == v)
                        .filter_map(|r| r.result.as_ref().ok().and_then(get))
                        .collect();
                    let count = xs.len();
                    let mean = if count == 0 { f64::NAN } else { xs.iter().sum::<f64>() / count as f64 };
                    let std = if count < 2 {
                        0.0
                    } else {
                        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
                    };
                    Aggregate { value: v, mean, std, count }
                })
                .collect(),
        )
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Runs [`run_scenario`] at every `(value, seed)` pair. Points run on the
/// current rayon pool; rows come back in a fixed order.
pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64], seeds: &[u64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(ConfigError::Invalid {
            field: format!("sweep.{axis}"),
            value: "[]".into(),
            bound: "at least one value".into(),
        }
        .into());
    }
    if seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut points = Vec::with_capacity(values.len() * seeds.len());
    for &v in &values {
        let base = axis.apply(cfg, v)?;
        for &seed in seeds {
            let mut point = base.clone();
            point.run.seed = seed;
            points.push((v, seed, point));
        }
    }
    let rows = points
        .into_par_iter()
        .map(|(value, seed, point)| SweepRow {
            value,
            seed,
            result: run_scenario(&point).map(|o| o.summary()).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepResult {
        axis,
        values,
        seeds: seeds.to_vec(),
        rows,
    })
}

/// Seeds `run.seed, run.seed + 1, ...` as configured for sweeps.
pub fn sweep_seeds(cfg: &ScenarioConfig) -> Vec<u64> {
    (0..cfg.sweep.seeds as u64).map(|k| cfg.run.seed.wrapping_add(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Mpp,
    Sa,
    Fixed,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Mpp, Strategy::Sa, Strategy::Fixed, Strategy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Mpp => "MPP",
            Strategy::Sa => "SA",
            Strategy::Fixed => "FIXED",
            Strategy::Random => "RANDOM",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::Invalid {
                field: "strategy".into(),
                value: s.into(),
                bound: "one of MPP, SA, FIXED, RANDOM".into(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRow {
    pub strategy: Strategy,
    /// Summed over iterations.
    pub server_cost: f64,
    pub welfare: f64,
    pub mean_rho: f64,
    pub final_excess_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub seed: u64,
    pub rows: Vec<StrategyRow>,
}

impl Comparison {
    pub fn row(&self, strategy: Strategy) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }
}

/// Evaluates each strategy's budgets under its rewards. SA uses its own
/// reward path; FIXED and RANDOM are paid the equilibrium rewards. RANDOM
/// draws each budget uniformly from `compare.random_low..random_high`, or
/// from the equilibrium's feasible interval (raised to the budget floor).
pub fn compare_strategies(cfg: &ScenarioConfig, strategies: &[Strategy]) -> Result<Comparison> {
    if strategies.len() < 2 {
        return Err(Error::param("strategies", "need at least two strategies"));
    }
    let outcome = run_scenario(&ScenarioConfig {
        flsim: crate::config::FlsimSection {
            enabled: false,
            ..cfg.flsim.clone()
        },
        ..cfg.clone()
    })?;
    let Instance {
        seed,
        ref model,
        ref roster,
        ..
    } = outcome.instance;
    let server = cfg.server_params();
    let eps = roster.epsilons(&server)?;
    let n = roster.len();
    let mpp_rewards = outcome.equilibrium.rewards();

    let mut rows = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let (rewards, budgets) = match strategy {
            Strategy::Mpp => (mpp_rewards.clone(), outcome.equilibrium.budgets()),
            Strategy::Sa => (outcome.sa.rewards.clone(), outcome.sa.budgets.clone()),
            Strategy::Fixed => (mpp_rewards.clone(), vec![vec![cfg.compare.fixed_rho; n]; mpp_rewards.len()]),
            Strategy::Random => {
                let (lo, hi) = match (cfg.compare.random_low, cfg.compare.random_high, outcome.equilibrium.feasible_bounds) {
                    (Some(lo), Some(hi), _) => (lo, hi),
                    (_, _, Some((lo, hi))) => (lo.max(cfg.solver.rho_min), hi.max(cfg.solver.rho_min)),
                    _ => {
                        return Err(Error::param(
                            "compare.random_low",
                            "no feasible interval (alpha*S >= 1); set compare.random_low/high",
                        ))
                    }
                };
                let budgets = (0..mpp_rewards.len())
                    .map(|t| {
                        let mut rng = stream(seed, Domain::RandomBaseline, t as u64);
                        (0..n)
                            .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
                            .collect()
                    })
                    .collect();
                (mpp_rewards.clone(), budgets)
            }
        };
        let server_cost = rewards
            .iter()
            .zip(&budgets)
            .enumerate()
            .map(|(k, (&r, rho))| server_cost(r, rho, &eps, server.tau, k + 1))
            .sum::<Result<f64>>()?;
        let welfare = social_welfare(&rewards, &budgets, model, roster, server.alpha)?;
        let mean_rho = budgets.iter().flatten().sum::<f64>() / (budgets.len() * n) as f64;
        let final_excess_loss = if cfg.flsim.enabled {
            Some(
                run_training(cfg, &outcome.instance, &budgets)
                    .stage(Stage::Training)?
                    .final_excess_loss(),
            )
        } else {
            None
        };
        rows.push(StrategyRow {
            strategy,
            server_cost,
            welfare,
            mean_rho,
            final_excess_loss,
        });
    }
    Ok(Comparison { seed, rows })
}

/// In-memory run directory: file names and contents, written in one go.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFiles {
    pub files: Vec<(String, Vec<u8>)>,
}

impl RunFiles {
    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    fn push(&mut self, name: impl Into<String>, contents: Vec<u8>) {
        self.files.push((name.into(), contents));
    }

    /// Creates `dir` and writes every file.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn header(cfg: &ScenarioConfig, seeds: &[u64], notes: &[String]) -> Vec<u8> {
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let mut out = format!(
        "# config_hash={} seed={} rng={}\n",
        cfg.hash(),
        seeds.join(";"),
        RNG_ALGORITHM
    );
    for note in notes {
        out.push_str(&format!("# {}\n", note.replace('\n', " ")));
    }
    out.into_bytes()
}

fn csv_bytes(prefix: Vec<u8>, head: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(prefix);
    w.write_record(head).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Files for a single scenario: `config.echo`, `equilibrium.csv`, `poa.csv`
/// and, with training, `trace.csv`.
pub fn scenario_files(cfg: &ScenarioConfig, config_text: &str, outcome: &ScenarioOutcome) -> Result<RunFiles> {
    let seed = [outcome.instance.seed];
    let eq = &outcome.equilibrium;
    let model = &outcome.instance.model;
    let roster = &outcome.instance.roster;
    let mut files = RunFiles::default();
    files.push("config.echo", config_text.as_bytes().to_vec());

    let mut notes = vec![format!("converged={} rounds={}", eq.converged, eq.rounds)];
    notes.extend(eq.warnings.iter().cloned());
    let mut rows = Vec::new();
    for (k, s) in eq.states.iter().enumerate() {
        let risk = crate::graph::external_risk(model, &s.budgets)?;
        for (i, c) in roster.clients().iter().enumerate() {
            rows.push(vec![
                s.t.to_string(),
                i.to_string(),
                c.a.to_string(),
                c.b.to_string(),
                c.data_size.to_string(),
                s.reward.to_string(),
                s.budgets[i].to_string(),
                s.mean_field[i].to_string(),
                risk[i].to_string(),
                eq.utilities[k][i].to_string(),
                outcome.sa.budgets[k][i].to_string(),
                eq.server_costs[k].to_string(),
            ]);
        }
    }
    files.push(
        "equilibrium.csv",
        csv_bytes(
            header(cfg, &seed, &notes),
            &[
                "t",
                "client",
                "a",
                "b",
                "data_size",
                "reward",
                "rho",
                "mean_field",
                "external_risk",
                "utility",
                "rho_sa",
                "server_cost",
            ],
            rows,
        ),
    );

    let p = &outcome.poa;
    let (lo, hi) = eq.feasible_bounds.unzip();
    let metrics: Vec<(&str, String)> = vec![
        ("welfare_sw", p.welfare_sw.to_string()),
        ("welfare_sw_sa", p.welfare_sw_sa.to_string()),
        ("welfare_mpp", p.welfare_mpp.to_string()),
        ("welfare_sa", p.welfare_sa.to_string()),
        ("poa_mpp_true", opt(p.poa_mpp_true)),
        ("poa_sa_true", opt(p.poa_sa_true)),
        ("poa_mpp_closed_form", opt(p.poa_mpp_closed_form)),
        ("sa_lower_bound", opt(p.sa_lower_bound)),
        ("sw_clamped", p.sw_clamped.to_string()),
        ("server_cost", outcome.server_cost().to_string()),
        ("rounds", eq.rounds.to_string()),
        ("converged", eq.converged.to_string()),
        ("non_contractive", eq.non_contractive.to_string()),
        ("feasible_low", opt(lo)),
        ("feasible_high", opt(hi)),
        ("within_bounds", eq.within_bounds.map_or_else(String::new, |b| b.to_string())),
        ("consistency_gap", eq.consistency_gap(model).to_string()),
    ];
    files.push(
        "poa.csv",
        csv_bytes(
            header(cfg, &seed, &[]),
            &["metric", "value"],
            metrics.into_iter().map(|(m, v)| vec![m.to_string(), v]),
        ),
    );

    if let Some(trace) = &outcome.trace {
        files.push("trace.csv", trace_bytes(cfg, outcome.instance.seed, trace));
    }
    Ok(files)
}

pub fn trace_bytes(cfg: &ScenarioConfig, seed: u64, trace: &TrainingTrace) -> Vec<u8> {
    let mut out = header(cfg, &[seed], &[]);
    trace.write_csv(&mut out).expect("in-memory write");
    out
}

/// `graph.txt` (edge list) and `propagation.csv` (dense coefficients).
pub fn graph_files(cfg: &ScenarioConfig, config_text: &str, instance: &Instance) -> RunFiles {
    let mut files = RunFiles::default();
    files.push("config.echo", config_text.as_bytes().to_vec());
    files.push("graph.txt", instance.graph.to_text().into_bytes());
    let n = instance.model.n();
    let head: Vec<String> = std::iter::once("client".to_string())
        .chain((0..n).map(|j| format!("to_{j}")))
        .collect();
    let head: Vec<&str> = head.iter().map(String::as_str).collect();
    let sigma = instance.model.sigma();
    let rows = (0..n).map(|i| {
        std::iter::once(i.to_string())
            .chain((0..n).map(|j| sigma[(i, j)].to_string()))
            .collect()
    });
    files.push(
        "propagation.csv",
        csv_bytes(header(cfg, &[instance.seed], &[]), &head, rows),
    );
    files
}

/// `sweep_<axis>.csv` with one row per point, and `sweep_<axis>_<metric>.csv`
/// with per-value mean and standard deviation.
pub fn sweep_files(cfg: &ScenarioConfig, config_text: &str, result: &SweepResult) -> RunFiles {
    let axis = result.axis.name();
    let mut files = RunFiles::default();
    files.push("config.echo", config_text.as_bytes().to_vec());
    let mut head = vec![axis, "seed", "status"];
    head.extend(SWEEP_METRICS.iter().map(|(m, _)| *m));
    head.push("error");
    let rows = result.rows.iter().map(|r| {
        let mut row = vec![r.value.to_string(), r.seed.to_string()];
        match &r.result {
            Ok(p) => {
                row.push(if p.converged { "ok" } else { "not_converged" }.into());
                row.extend(SWEEP_METRICS.iter().map(|(_, get)| opt(get(p))));
                row.push(String::new());
            }
            Err(e) => {
                row.push("error".into());
                row.extend(SWEEP_METRICS.iter().map(|_| String::new()));
                row.push(e.clone());
            }
        }
        row
    });
    files.push(
        format!("sweep_{axis}.csv"),
        csv_bytes(header(cfg, &result.seeds, &[]), &head, rows),
    );
    for (metric, _) in SWEEP_METRICS {
        let agg = result.aggregate(metric).expect("known metric");
        let rows = agg.iter().map(|a| {
            vec![
                a.value.to_string(),
                a.mean.to_string(),
                a.std.to_string(),
                a.count.to_string(),
            ]
        });
        files.push(
            format!("sweep_{axis}_{metric}.csv"),
            csv_bytes(header(cfg, &result.seeds, &[]), &[axis, "mean", "std", "count"], rows),
        );
    }
    files
}

/// `compare.csv`.
pub fn compare_files(cfg: &ScenarioConfig, config_text: &str, cmp: &Comparison) -> RunFiles {
    let mut files = RunFiles::default();
    files.push("config.echo", config_text.as_bytes().to_vec());
    let rows = cmp.rows.iter().map(|r| {
        vec![
            r.strategy.name().to_string(),
            r.server_cost.to_string(),
            r.welfare.to_string(),
            r.mean_rho.to_string(),
            opt(r.final_excess_loss),
        ]
    });
    files.push(
        "compare.csv",
        csv_bytes(
            header(cfg, &[cmp.seed], &[]),
            &["strategy", "server_cost", "welfare", "mean_rho", "final_excess_loss"],
            rows,
        ),
    );
    files
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names_round_trip() {
        for axis in [SweepAxis::Alpha, SweepAxis::Hops, SweepAxis::NClients, SweepAxis::Eps0] {
            assert_eq!(axis.name().parse::<SweepAxis>().unwrap(), axis);
        }
        assert!("lambda".parse::<SweepAxis>().is_err());
        assert_eq!("random".parse::<Strategy>().unwrap(), Strategy::Random);
    }

    #[test]
    fn apply_changes_only_the_axis() {
        let cfg = ScenarioConfig::default();
        let moved = SweepAxis::Hops.apply(&cfg, 3.0).unwrap();
        assert_eq!(moved.propagation.hops, 3);
        assert_eq!(
            ScenarioConfig {
                propagation: cfg.propagation.clone(),
                ..moved
            },
            cfg
        );
        assert!(SweepAxis::Hops.apply(&cfg, 2.5).is_err());
        assert!(SweepAxis::Alpha.apply(&cfg, 1.5).is_err());
    }

    #[test]
    fn roster_sampling_is_seeded() {
        let cfg = ScenarioConfig::default();
        let a = sample_roster(&cfg, 3).unwrap();
        assert_eq!(a, sample_roster(&cfg, 3).unwrap());
        assert_ne!(a, sample_roster(&cfg, 4).unwrap());
        for c in a.clients() {
            assert!((0.5..1.5).contains(&c.a) && (0.5..1.5).contains(&c.b));
            assert!((cfg.economics.data_low..=cfg.economics.data_high).contains(&c.data_size));
        }
    }

    #[test]
    fn sweep_keeps_failed_points() {
        let mut cfg = ScenarioConfig::default();
        cfg.graph.n = 5;
        cfg.run.horizon = 2;
        cfg.solver.max_rounds = 1;
        let res = sweep(&cfg, SweepAxis::Eps0, &[1e-12, 1e-1], &[1, 2]).unwrap();
        assert_eq!(res.values, vec![1e-12, 1e-1]);
        assert_eq!(res.rows.len(), 4);
        assert!(res.failures() >= 1);
        assert!(res.rows.iter().any(|r| r.result.is_ok()));
    }
}
