use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use traffic_mpc::benchmark;
use traffic_mpc::mpc::DecentralizedController;
use traffic_mpc::sim::{
    build_controller, compute_metrics, format_summary, format_sweep, run_batch, run_with,
    sweep_horizon, ControllerKind, Disturbances, RunRecord,
};
use traffic_mpc::Scenario;

#[derive(Parser)]
#[command(
    name = "traffic-mpc",
    version,
    about = "Closed-loop MPC traffic signal and inflow control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario TOML file, or `benchmark` / `benchmark-emergency` for the shipped ones.
    #[arg(long, default_value = "benchmark")]
    scenario: String,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one closed-loop run and write its trajectory CSV.
    Run {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "decentralized")]
        controller: ControllerKind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every controller over a range of seeds and tabulate the results.
    Batch {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Seed of the first run; run r uses seed + r.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        steps: Option<usize>,
        /// Run seeds one after another so that solve times are not inflated.
        #[arg(long)]
        sequential: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Batch one controller across prediction horizons.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "decentralized")]
        controller: ControllerKind,
        #[arg(long, default_value_t = 1)]
        tf_min: usize,
        #[arg(long, default_value_t = 5)]
        tf_max: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a scenario file and report the first problem found.
    Validate {
        #[arg(long)]
        scenario: String,
    },
}

fn load(name: &str) -> Result<Scenario, String> {
    match name {
        "benchmark" => Ok(benchmark::scenario()),
        "benchmark-emergency" => Ok(benchmark::emergency_scenario()),
        path => Scenario::load(path).map_err(|e| e.to_string()),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn prepare(out: &Path) -> Result<(), String> {
    fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))
}

fn run_one(scenario: &Scenario, kind: ControllerKind, out: &Path) -> Result<RunRecord, String> {
    let record = if kind == ControllerKind::Decentralized {
        let mut c = DecentralizedController::new(
            &scenario.network,
            scenario.controller.clone(),
            scenario.units.clone(),
            &scenario.initial,
        )
        .map_err(|e| e.to_string())?;
        let result = run_with(scenario, &mut c, Disturbances::Sampled);
        let mut log = Vec::new();
        c.write_log(&mut log).map_err(|e| e.to_string())?;
        write(&out.join("rounds.jsonl"), log)?;
        result
    } else {
        let mut c = build_controller(scenario, kind).map_err(|e| e.to_string())?;
        run_with(scenario, c.as_mut(), Disturbances::Sampled)
    };
    record.map_err(|e| format!("run aborted: {e}"))
}

fn execute(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            scenario,
            controller,
            seed,
            steps,
            out,
        } => {
            let mut sc = load(&scenario.scenario)?;
            if let Some(s) = seed {
                sc = sc.with_seed(s);
            }
            if let Some(n) = steps {
                sc = sc.with_steps(n);
            }
            prepare(&out)?;
            let record = run_one(&sc, controller, &out)?;
            write(&out.join("run.csv"), record.to_csv())?;
            let m = compute_metrics(
                &record,
                &sc.controller.caps,
                &sc.controller.extended_caps,
                sc.run.window,
            );
            let mut summary = format!(
                "scenario {}\ncontroller {}\nseed {}\nsteps {}\nssd {:.4}\n",
                sc.name,
                controller,
                sc.run.seed,
                record.steps.len(),
                m.ssd
            );
            if let Some(dep) = m.dep {
                summary.push_str(&format!("dep {dep:.4}\n"));
            }
            summary.push_str(&format!(
                "mean_ms {:.3}\nmax_ms {:.3}\ncap_violations {}\nextended_violations {}\nrelaxed_steps {}\n",
                m.mean_micros / 1000.0,
                m.max_micros as f64 / 1000.0,
                m.cap_violations,
                m.extended_violations,
                m.relaxed_steps
            ));
            write(&out.join("summary.txt"), &summary)?;
            print!("{summary}");
            Ok(())
        }
        Command::Batch {
            scenario,
            runs,
            seed,
            steps,
            sequential,
            out,
        } => {
            let mut sc = load(&scenario.scenario)?;
            if let Some(n) = steps {
                sc = sc.with_steps(n);
            }
            prepare(&out)?;
            let result = run_batch(&sc, &ControllerKind::ALL, runs, seed, !sequential);
            let rows = result.summarize();
            let table = format_summary(&rows);
            write(&out.join("summary.txt"), &table)?;
            write(
                &out.join("summary.json"),
                serde_json::to_vec_pretty(&serde_json::json!({ "summary": rows, "runs": result.runs, "aborted": result.aborted }))
                    .map_err(|e| e.to_string())?,
            )?;
            print!("{table}");
            for a in &result.aborted {
                eprintln!("{} seed {}: {}", a.controller, a.seed, a.reason);
            }
            if result.aborted.is_empty() {
                Ok(())
            } else {
                Err(format!("{} run(s) aborted", result.aborted.len()))
            }
        }
        Command::Sweep {
            scenario,
            controller,
            tf_min,
            tf_max,
            runs,
            seed,
            steps,
            out,
        } => {
            if tf_min == 0 || tf_min > tf_max {
                return Err(format!("invalid horizon range {tf_min}..={tf_max}"));
            }
            let mut sc = load(&scenario.scenario)?;
            if let Some(n) = steps {
                sc = sc.with_steps(n);
            }
            prepare(&out)?;
            let horizons: Vec<usize> = (tf_min..=tf_max).collect();
            let rows =
                sweep_horizon(&sc, controller, &horizons, runs, seed).map_err(|e| e.to_string())?;
            let table = format_sweep(&rows);
            write(&out.join("sweep.txt"), &table)?;
            write(
                &out.join("sweep.json"),
                serde_json::to_vec_pretty(&rows).map_err(|e| e.to_string())?,
            )?;
            print!("{table}");
            Ok(())
        }
        Command::Validate { scenario } => {
            let sc = load(&scenario)?;
            println!(
                "ok: {} lanes, {} intersections, {} inlets, {} units, {} emergencies",
                sc.network.n_lanes(),
                sc.network.n_intersections(),
                sc.network.n_inlets(),
                sc.units.len(),
                sc.emergencies.len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
