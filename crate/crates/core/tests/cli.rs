use std::path::Path;
use std::process::{Command, Output};

fn mppfl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mppfl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "graph.n = 8\nrun.horizon = 3\n");
    let out = mppfl(dir.path(), &["solve", "--config", &cfg, "--out", "run", "--workers", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.echo", "equilibrium.csv", "poa.csv"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f}");
    }
    assert!(!dir.path().join("run/trace.csv").exists());
    let echo = std::fs::read_to_string(dir.path().join("run/config.echo")).unwrap();
    assert_eq!(echo, "graph.n = 8\nrun.horizon = 3\n");
}

#[test]
fn defaults_apply_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = mppfl(dir.path(), &["flsim", "--seed", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("mppfl-run");
    assert!(run.join("trace.csv").is_file());
    let eq = std::fs::read_to_string(run.join("equilibrium.csv")).unwrap();
    assert!(eq.lines().next().unwrap().contains(" seed=4 "));
}

#[test]
fn graph_subcommand_round_trips_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = mppfl(dir.path(), &["graph", "--seed", "11", "--out", "g"]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("g/graph.txt")).unwrap();
    let graph = mppfl::graph::WeightedDigraph::parse(&text).unwrap();
    assert_eq!(graph.n(), 20);
    assert_eq!(graph.to_text(), text);
    assert!(dir.path().join("g/propagation.csv").is_file());
}

#[test]
fn sweep_and_compare_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "graph.n = 6\nrun.horizon = 2\nsweep.seeds = 2\n");
    let out = mppfl(
        dir.path(),
        &["sweep", "--config", &cfg, "--axis", "alpha", "--values", "0.01,0.1", "--out", "s"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(dir.path().join("s/sweep_alpha.csv")).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 2);
    assert!(dir.path().join("s/sweep_alpha_welfare_mpp.csv").is_file());

    let out = mppfl(dir.path(), &["compare", "--config", &cfg, "--strategies", "MPP,FIXED", "--out", "c"]);
    assert_eq!(code(&out), 0);
    let body = std::fs::read_to_string(dir.path().join("c/compare.csv")).unwrap();
    assert_eq!(body.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn config_error_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "server.alpha = 1.5\n");
    let out = mppfl(dir.path(), &["solve", "--config", &cfg, "--out", "run"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("server.alpha"));
    assert!(!dir.path().join("run").exists());

    let cfg = write_config(dir.path(), "graph.bogus = 3\n");
    assert_eq!(code(&mppfl(dir.path(), &["solve", "--config", &cfg, "--out", "run"])), 1);
    assert!(!dir.path().join("run").exists());

    let out = mppfl(dir.path(), &["sweep", "--axis", "lambda", "--out", "run"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&mppfl(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&mppfl(dir.path(), &["--help"])), 0);
}

#[test]
fn non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "solver.max_rounds = 2\nsolver.eps0 = 1e-14\n");
    let out = mppfl(dir.path(), &["solve", "--config", &cfg, "--out", "run"]);
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn io_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let out = mppfl(dir.path(), &["solve", "--config", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 3);

    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let out = mppfl(dir.path(), &["graph", "--out", "blocker/run"]);
    assert_eq!(code(&out), 3);
}
