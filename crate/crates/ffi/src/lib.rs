//! C ABI over the `mppfl` library.
//!
//! Objects cross the boundary as opaque handles created by
//! `mpp_scenario_from_*`, `mpp_scenario_run` and `mpp_graph_generate`, and
//! released by the matching `*_free`. Every fallible call
//! returns an [`MppStatus`]; on failure, [`mpp_last_error`] gives a message for
//! the calling thread. Panics are caught and reported as
//! [`MppStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mppfl::config::{load_config, parse_config, ScenarioConfig};
use mppfl::equilibrium::best_response;
use mppfl::experiment::{build_instance, run_scenario, scenario_files, ScenarioOutcome};
use mppfl::graph::WeightedDigraph;
use mppfl::mechanism::{noise_variance, ClientProfile};
use mppfl::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MppStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    Panic = 6,
}

/// Scenario configuration.
pub struct MppScenario {
    config: ScenarioConfig,
    text: String,
}

/// Result of running a scenario.
pub struct MppOutcome {
    config: ScenarioConfig,
    text: String,
    outcome: ScenarioOutcome,
}

/// Weighted social graph.
pub struct MppGraph {
    graph: WeightedDigraph,
}

/// Scalar summary of an outcome. Undefined ratios are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MppSummary {
    pub welfare_mpp: f64,
    pub welfare_sa: f64,
    pub welfare_sw: f64,
    pub poa_mpp_true: f64,
    pub poa_sa_true: f64,
    pub poa_mpp_closed_form: f64,
    pub server_cost: f64,
    pub rounds: usize,
    pub converged: bool,
    pub non_contractive: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: MppStatus, msg: impl Into<String>) -> MppStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> MppStatus {
    match err.root() {
        Error::Config(_) | Error::Parameter { .. } | Error::Structural { .. } => MppStatus::Config,
        Error::Domain(_) => MppStatus::InvalidArgument,
        Error::Io { .. } => MppStatus::Io,
        _ => MppStatus::Solver,
    }
}

fn from_error(err: Error) -> MppStatus {
    let status = status_of(&err);
    fail(status, err.to_string())
}

/// Runs `f`, converting panics into [`MppStatus::Panic`].
fn guard(f: impl FnOnce() -> MppStatus) -> MppStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(MppStatus::Panic, "internal panic"))
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, MppStatus> {
    if s.is_null() {
        return Err(fail(MppStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(MppStatus::InvalidArgument, "string is not valid UTF-8"))
}

macro_rules! deref {
    ($p:expr) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(MppStatus::NullPointer, concat!("null argument `", stringify!($p), "`")),
        }
    };
}

macro_rules! try_c {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mpp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses and validates config text. An empty string yields the defaults.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_scenario_from_str(text: *const c_char, out: *mut *mut MppScenario) -> MppStatus {
    guard(|| {
        if out.is_null() {
            return fail(MppStatus::NullPointer, "null argument `out`");
        }
        let text = try_c!(c_str(text));
        match parse_config(text) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(MppScenario {
                    config,
                    text: text.to_string(),
                }));
                MppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads and validates a config file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_scenario_from_file(path: *const c_char, out: *mut *mut MppScenario) -> MppStatus {
    guard(|| {
        if out.is_null() {
            return fail(MppStatus::NullPointer, "null argument `out`");
        }
        let path = try_c!(c_str(path));
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(MppStatus::Io, format!("{path}: {e}")),
        };
        match load_config(path) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(MppScenario { config, text }));
                MppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Overrides the master seed.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpp_scenario_set_seed(scenario: *mut MppScenario, seed: u64) -> MppStatus {
    let s = match scenario.as_mut() {
        Some(s) => s,
        None => return fail(MppStatus::NullPointer, "null argument `scenario`"),
    };
    s.config.run.seed = seed;
    MppStatus::Ok
}

/// Number of clients in the scenario, or 0 for NULL.
///
/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpp_scenario_clients(scenario: *const MppScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.config.graph.n)
}

/// # Safety
/// `scenario` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mpp_scenario_free(scenario: *mut MppScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Solves the scenario: equilibrium, baselines and price of anarchy.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_scenario_run(scenario: *const MppScenario, out: *mut *mut MppOutcome) -> MppStatus {
    guard(|| {
        let s = deref!(scenario);
        if out.is_null() {
            return fail(MppStatus::NullPointer, "null argument `out`");
        }
        match run_scenario(&s.config) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(MppOutcome {
                    config: s.config.clone(),
                    text: s.text.clone(),
                    outcome,
                }));
                MppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of iterations `T`, or 0 for NULL.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpp_outcome_horizon(outcome: *const MppOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.outcome.equilibrium.horizon())
}

/// Number of clients, or 0 for NULL.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpp_outcome_clients(outcome: *const MppOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.outcome.instance.roster.len())
}

/// Copies the per-iteration rewards into `buf` (`len >= horizon`).
///
/// # Safety
/// `outcome` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mpp_outcome_rewards(outcome: *const MppOutcome, buf: *mut f64, len: usize) -> MppStatus {
    let o = deref!(outcome);
    let rewards = o.outcome.equilibrium.rewards();
    copy_out(&rewards, buf, len)
}

/// Copies the equilibrium budgets of iteration `t` (1-based) into `buf`
/// (`len >= clients`).
///
/// # Safety
/// `outcome` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mpp_outcome_budgets(
    outcome: *const MppOutcome,
    t: usize,
    buf: *mut f64,
    len: usize,
) -> MppStatus {
    let o = deref!(outcome);
    let states = &o.outcome.equilibrium.states;
    if t == 0 || t > states.len() {
        return fail(
            MppStatus::InvalidArgument,
            format!("iteration {t} outside 1..={}", states.len()),
        );
    }
    copy_out(&states[t - 1].budgets, buf, len)
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> MppStatus {
    if buf.is_null() {
        return fail(MppStatus::NullPointer, "null argument `buf`");
    }
    if len < values.len() {
        return fail(
            MppStatus::InvalidArgument,
            format!("buffer holds {len} values, need {}", values.len()),
        );
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    MppStatus::Ok
}

/// Fills `out` with welfare, price-of-anarchy and convergence figures.
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_outcome_summary(outcome: *const MppOutcome, out: *mut MppSummary) -> MppStatus {
    let o = deref!(outcome);
    if out.is_null() {
        return fail(MppStatus::NullPointer, "null argument `out`");
    }
    let p = &o.outcome.poa;
    let eq = &o.outcome.equilibrium;
    *out = MppSummary {
        welfare_mpp: p.welfare_mpp,
        welfare_sa: p.welfare_sa,
        welfare_sw: p.welfare_sw,
        poa_mpp_true: p.poa_mpp_true.unwrap_or(f64::NAN),
        poa_sa_true: p.poa_sa_true.unwrap_or(f64::NAN),
        poa_mpp_closed_form: p.poa_mpp_closed_form.unwrap_or(f64::NAN),
        server_cost: o.outcome.server_cost(),
        rounds: eq.rounds,
        converged: eq.converged,
        non_contractive: eq.non_contractive,
    };
    MppStatus::Ok
}

/// Writes the run directory (`config.echo`, `equilibrium.csv`, `poa.csv`).
///
/// # Safety
/// `outcome` must be a live handle; `dir` a nul-terminated path.
#[no_mangle]
pub unsafe extern "C" fn mpp_outcome_write(outcome: *const MppOutcome, dir: *const c_char) -> MppStatus {
    guard(|| {
        let o = deref!(outcome);
        let dir = try_c!(c_str(dir));
        match scenario_files(&o.config, &o.text, &o.outcome).and_then(|f| f.write_to(Path::new(dir))) {
            Ok(()) => MppStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `outcome` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mpp_outcome_free(outcome: *mut MppOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Generates the scenario's social graph for its seed.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_graph_generate(scenario: *const MppScenario, out: *mut *mut MppGraph) -> MppStatus {
    guard(|| {
        let s = deref!(scenario);
        if out.is_null() {
            return fail(MppStatus::NullPointer, "null argument `out`");
        }
        match build_instance(&s.config, s.config.run.seed) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(MppGraph { graph: instance.graph }));
                MppStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpp_graph_size(graph: *const MppGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.n())
}

/// Reads the weight of edge `i -> j`.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_graph_weight(graph: *const MppGraph, i: usize, j: usize, out: *mut f64) -> MppStatus {
    let g = deref!(graph);
    if out.is_null() {
        return fail(MppStatus::NullPointer, "null argument `out`");
    }
    let n = g.graph.n();
    if i >= n || j >= n {
        return fail(MppStatus::InvalidArgument, format!("edge ({i}, {j}) outside a graph of {n} nodes"));
    }
    *out = g.graph.weight(i, j);
    MppStatus::Ok
}

/// Edge-list text of the graph; release with [`mpp_string_free`]. NULL on
/// failure.
///
/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mpp_graph_to_text(graph: *const MppGraph) -> *mut c_char {
    match graph.as_ref() {
        Some(g) => CString::new(g.graph.to_text()).map_or(ptr::null_mut(), CString::into_raw),
        None => {
            set_error("null argument `graph`");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mpp_graph_free(graph: *mut MppGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mpp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Gaussian noise variance for budget `rho` with clipping threshold `clip`
/// and `data_size` samples.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_noise_variance(clip: f64, data_size: u64, rho: f64, out: *mut f64) -> MppStatus {
    if out.is_null() {
        return fail(MppStatus::NullPointer, "null argument `out`");
    }
    match noise_variance(clip, data_size, rho) {
        Ok(v) => {
            *out = v;
            MppStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Unconstrained client best response to `reward` given the mean-field
/// estimate `phi`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mpp_best_response(
    reward: f64,
    phi: f64,
    a: f64,
    b: f64,
    alpha: f64,
    n_clients: usize,
    out: *mut f64,
) -> MppStatus {
    if out.is_null() {
        return fail(MppStatus::NullPointer, "null argument `out`");
    }
    if !(a > 0.0 && a.is_finite()) || !(reward.is_finite() && phi.is_finite() && b.is_finite() && alpha.is_finite()) {
        return fail(MppStatus::InvalidArgument, "arguments must be finite with a > 0");
    }
    *out = best_response(reward, phi, &ClientProfile::new(a, b, 1), alpha, n_clients);
    MppStatus::Ok
}
