use std::ffi::{CStr, CString};
use std::ptr;

use mppfl_ffi::*;

fn scenario(text: &str) -> *mut MppScenario {
    let text = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_from_str(text.as_ptr(), &mut out) }, MppStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = mpp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_and_read_back() {
    let s = scenario("graph.n = 6\nrun.horizon = 4\n");
    assert_eq!(unsafe { mpp_scenario_clients(s) }, 6);
    let mut o = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_run(s, &mut o) }, MppStatus::Ok);
    assert_eq!(unsafe { mpp_outcome_horizon(o) }, 4);
    assert_eq!(unsafe { mpp_outcome_clients(o) }, 6);

    let mut rewards = [0.0; 4];
    assert_eq!(unsafe { mpp_outcome_rewards(o, rewards.as_mut_ptr(), 4) }, MppStatus::Ok);
    assert!(rewards.iter().all(|&r| r > 0.0));
    let mut short = [0.0; 3];
    assert_eq!(
        unsafe { mpp_outcome_rewards(o, short.as_mut_ptr(), 3) },
        MppStatus::InvalidArgument
    );

    let mut budgets = [0.0; 6];
    assert_eq!(unsafe { mpp_outcome_budgets(o, 1, budgets.as_mut_ptr(), 6) }, MppStatus::Ok);
    assert!(budgets.iter().all(|&b| b > 0.0));
    assert_eq!(
        unsafe { mpp_outcome_budgets(o, 0, budgets.as_mut_ptr(), 6) },
        MppStatus::InvalidArgument
    );
    assert!(last_error().contains("iteration 0"));

    let mut summary = std::mem::MaybeUninit::<MppSummary>::uninit();
    assert_eq!(unsafe { mpp_outcome_summary(o, summary.as_mut_ptr()) }, MppStatus::Ok);
    let summary = unsafe { summary.assume_init() };
    assert!(summary.converged);
    assert!(summary.welfare_sw >= summary.welfare_mpp - 1e-8);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("run").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mpp_outcome_write(o, path.as_ptr()) }, MppStatus::Ok);
    for f in ["config.echo", "equilibrium.csv", "poa.csv"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }

    unsafe {
        mpp_outcome_free(o);
        mpp_scenario_free(s);
    }
}

#[test]
fn matches_library_results() {
    let s = scenario("graph.n = 5\nrun.horizon = 2\nrun.seed = 9\n");
    let mut o = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_run(s, &mut o) }, MppStatus::Ok);
    let cfg = mppfl::config::parse_config("graph.n = 5\nrun.horizon = 2\nrun.seed = 9\n").unwrap();
    let direct = mppfl::experiment::run_scenario(&cfg).unwrap();
    let mut budgets = [0.0; 5];
    unsafe { mpp_outcome_budgets(o, 2, budgets.as_mut_ptr(), 5) };
    assert_eq!(budgets.to_vec(), direct.equilibrium.states[1].budgets);
    unsafe {
        mpp_outcome_free(o);
        mpp_scenario_free(s);
    }
}

#[test]
fn config_errors_carry_messages() {
    let text = CString::new("server.alpha = 1.5").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_from_str(text.as_ptr(), &mut out) }, MppStatus::Config);
    assert!(out.is_null());
    assert!(last_error().contains("α ∈ (0,1)"));

    let text = CString::new("graph.n = 3\ngraph.n = 4").unwrap();
    assert_eq!(unsafe { mpp_scenario_from_str(text.as_ptr(), &mut out) }, MppStatus::Config);
    assert!(last_error().contains("line 2"));
}

#[test]
fn file_loading_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.cfg");
    std::fs::write(&path, "graph.n = 4\n").unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_from_file(c.as_ptr(), &mut out) }, MppStatus::Ok);
    assert_eq!(unsafe { mpp_scenario_clients(out) }, 4);
    unsafe { mpp_scenario_free(out) };

    let missing = CString::new(dir.path().join("missing.cfg").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mpp_scenario_from_file(missing.as_ptr(), &mut out) }, MppStatus::Io);
}

#[test]
fn solver_failure_maps_to_solver_status() {
    let s = scenario("graph.n = 5\nsolver.max_rounds = 1\nsolver.eps0 = 1e-14\n");
    let mut o = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_run(s, &mut o) }, MppStatus::Solver);
    assert!(o.is_null());
    assert!(last_error().contains("did not converge"));
    unsafe { mpp_scenario_free(s) };
}

#[test]
fn graph_handle() {
    let s = scenario("graph.n = 7");
    unsafe { mpp_scenario_set_seed(s, 42) };
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { mpp_graph_generate(s, &mut g) }, MppStatus::Ok);
    assert_eq!(unsafe { mpp_graph_size(g) }, 7);
    let mut w = -1.0;
    assert_eq!(unsafe { mpp_graph_weight(g, 0, 0, &mut w) }, MppStatus::Ok);
    assert_eq!(w, 0.0);
    assert_eq!(unsafe { mpp_graph_weight(g, 7, 0, &mut w) }, MppStatus::InvalidArgument);

    let text = unsafe { mpp_graph_to_text(g) };
    assert!(!text.is_null());
    let parsed = mppfl::graph::WeightedDigraph::parse(unsafe { CStr::from_ptr(text) }.to_str().unwrap()).unwrap();
    assert_eq!(parsed.n(), 7);
    for i in 0..7 {
        for j in 0..7 {
            let mut w = 0.0;
            unsafe { mpp_graph_weight(g, i, j, &mut w) };
            assert_eq!(parsed.weight(i, j), w);
        }
    }
    unsafe {
        mpp_string_free(text);
        mpp_graph_free(g);
        mpp_scenario_free(s);
    }
}

#[test]
fn scalar_helpers() {
    let mut v = 0.0;
    assert_eq!(unsafe { mpp_noise_variance(1.0, 10, 2.0, &mut v) }, MppStatus::Ok);
    assert_eq!(v, 2.0 / (100.0 * 2.0));
    assert_eq!(
        unsafe { mpp_noise_variance(1.0, 10, 0.0, &mut v) },
        MppStatus::InvalidArgument
    );
    assert_eq!(unsafe { mpp_best_response(3.0, 0.5, 1.0, 1.0, 0.1, 2, &mut v) }, MppStatus::Ok);
    assert!((v - 0.9).abs() < 1e-15);
    assert_eq!(
        unsafe { mpp_best_response(3.0, 0.5, 0.0, 1.0, 0.1, 2, &mut v) },
        MppStatus::InvalidArgument
    );
}

#[test]
fn null_handles_are_rejected() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_from_str(ptr::null(), &mut out) }, MppStatus::NullPointer);
    let mut outcome = ptr::null_mut();
    assert_eq!(unsafe { mpp_scenario_run(ptr::null(), &mut outcome) }, MppStatus::NullPointer);
    assert_eq!(unsafe { mpp_scenario_set_seed(ptr::null_mut(), 1) }, MppStatus::NullPointer);
    assert_eq!(unsafe { mpp_outcome_horizon(ptr::null()) }, 0);
    assert!(unsafe { mpp_graph_to_text(ptr::null()) }.is_null());
    unsafe {
        mpp_scenario_free(ptr::null_mut());
        mpp_outcome_free(ptr::null_mut());
        mpp_graph_free(ptr::null_mut());
        mpp_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mppfl.h")).unwrap();
    for name in [
        "MPP_STATUS_OK",
        "typedef struct MppScenario MppScenario",
        "mpp_scenario_run",
        "mpp_outcome_budgets",
        "mpp_graph_to_text",
        "mpp_last_error",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
