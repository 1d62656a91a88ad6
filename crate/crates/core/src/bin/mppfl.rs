use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mppfl::config::{parse_config, ScenarioConfig};
use mppfl::experiment::{
    build_instance, compare_files, compare_strategies, graph_files, run_scenario, scenario_files, sweep, sweep_files,
    sweep_seeds, RunFiles, Strategy, SweepAxis,
};
use mppfl::{ConfigError, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mppfl", version, about = "Privacy incentive mechanism experiments for federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config file (defaults apply when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "mppfl-run")]
    out: PathBuf,

    /// Master seed, overriding `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core), overriding `run.workers`.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the social graph and its propagation coefficients.
    Graph,
    /// Solve one scenario: equilibrium, baselines, price of anarchy.
    Solve,
    /// Sweep one parameter over values and seeds.
    Sweep {
        /// alpha, hops, n_clients or eps0.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; defaults to the configured grid.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Compare MPP against baseline strategies.
    Compare {
        #[arg(long, value_delimiter = ',', default_value = "MPP,SA,FIXED,RANDOM")]
        strategies: Vec<String>,
    },
    /// Solve and train on a synthetic task with the equilibrium budgets.
    Flsim,
}

fn load(cli: &Cli) -> Result<(ScenarioConfig, String)> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.run.workers = workers;
    }
    Ok((cfg, text))
}

fn execute(cli: &Cli, cfg: ScenarioConfig, text: &str) -> Result<RunFiles> {
    match &cli.command {
        Command::Graph => {
            let instance = build_instance(&cfg, cfg.run.seed)?;
            println!(
                "graph: {} clients, {} edges, max propagation row sum {:.6} (bound {:.6})",
                instance.graph.n(),
                instance.graph.edge_count(),
                instance.model.max_row_sum(),
                instance.model.bound()
            );
            Ok(graph_files(&cfg, text, &instance))
        }
        Command::Solve | Command::Flsim => {
            let mut cfg = cfg;
            if matches!(cli.command, Command::Flsim) {
                cfg.flsim.enabled = true;
            }
            let outcome = run_scenario(&cfg)?;
            let eq = &outcome.equilibrium;
            println!(
                "converged in {} rounds; welfare MPP {} SA {} optimum {}; server cost {}",
                eq.rounds,
                outcome.poa.welfare_mpp,
                outcome.poa.welfare_sa,
                outcome.poa.welfare_sw,
                outcome.server_cost()
            );
            if let Some(trace) = &outcome.trace {
                println!("final excess loss {}", trace.final_excess_loss());
            }
            for w in &eq.warnings {
                eprintln!("warning: {w}");
            }
            scenario_files(&cfg, text, &outcome)
        }
        Command::Sweep { axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let values = values.clone().unwrap_or_else(|| axis.configured_values(&cfg));
            let result = sweep(&cfg, axis, &values, &sweep_seeds(&cfg))?;
            println!(
                "sweep over {axis}: {} points, {} failed",
                result.rows.len(),
                result.failures()
            );
            Ok(sweep_files(&cfg, text, &result))
        }
        Command::Compare { strategies } => {
            let strategies = strategies
                .iter()
                .map(|s| s.trim().parse::<Strategy>())
                .collect::<Result<Vec<_>, ConfigError>>()?;
            let cmp = compare_strategies(&cfg, &strategies)?;
            for row in &cmp.rows {
                println!(
                    "{:<7} server cost {:<24} welfare {}",
                    row.strategy.name(),
                    row.server_cost,
                    row.welfare
                );
            }
            Ok(compare_files(&cfg, text, &cmp))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let (cfg, text) = load(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
    let files = pool.install(|| execute(cli, cfg, &text))?;
    files.write_to(&cli.out)?;
    println!("wrote {}", cli.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
