use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use tcsearch::config::Settings;
use tcsearch::formats::{read_scenario, write_fitted_params, write_graph, write_scenario, write_trace};
use tcsearch::harness::{emit_outputs, run_experiment, EstimatorChoice, StdClock};
use tcsearch_core::estimator::{fit_estimator, Estimator};
use tcsearch_core::scenario::{build_graph, generate_scenario, GenerativeParams, Scenario};
use tcsearch_core::simulator::{replay_check, run_mission_with_clock, MissionConfig, PlannerKind};

#[derive(Parser)]
#[command(name = "tcsearch", version, about = "Time-critical multi-robot search: planning experiments")]
struct Cli {
    /// JSON file with the same keys as the flags (snake_case); flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenario files, one per trial seed.
    Generate {
        #[command(flatten)]
        settings: Settings,
        /// Also write the proximity graph of each scenario.
        #[arg(long)]
        graph: bool,
    },
    /// Fit the parametric estimator on a training set.
    Fit {
        #[command(flatten)]
        settings: Settings,
        /// Directory of scenario files to train on instead of generating them.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run a paired experiment and write summary, scatter and curve CSVs.
    Run {
        #[command(flatten)]
        settings: Settings,
    },
    /// Run one mission and write its trace.
    Simulate {
        #[command(flatten)]
        settings: Settings,
        /// Scenario file to use instead of generating one from --seed.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn settings(config: Option<&Path>, flags: Settings) -> Result<Settings> {
    let file = match config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    Ok(file.overridden_by(flags))
}

fn generated(s: &Settings) -> Result<Vec<Scenario>> {
    let spec = s.experiment_spec();
    let mut out = Vec::new();
    for &n in &spec.n_pois {
        for seed in spec.trial_seeds() {
            out.push(generate_scenario(seed, n, &GenerativeParams::default()).with_context(|| format!("seed {seed}"))?);
        }
    }
    Ok(out)
}

fn generate(s: &Settings, graph: bool) -> Result<()> {
    let dir = s.out_dir();
    let scenarios = generated(s)?;
    for sc in &scenarios {
        let stem = format!("scenario_p{}_s{}", sc.pois.len(), sc.seed);
        write_scenario(&dir.join(format!("{stem}.json")), sc)?;
        if graph {
            write_graph(&dir.join(format!("{stem}.graph.json")), &build_graph(sc))?;
        }
    }
    println!("wrote {} scenarios to {}", scenarios.len(), dir.display());
    Ok(())
}

fn fit(s: &Settings, input: Option<&Path>) -> Result<()> {
    let scenarios = match input {
        Some(dir) => {
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("reading {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension().is_some_and(|x| x == "json")
                        && !p.to_string_lossy().ends_with(".graph.json")
                })
                .collect();
            paths.sort();
            paths.iter().map(|p| read_scenario(p)).collect::<Result<Vec<_>, _>>()?
        }
        None => generated(s)?,
    };
    let report = fit_estimator(&scenarios)?;
    let path = s.out_dir().join("fitted_params.json");
    write_fitted_params(&path, &report.params)?;
    let p = &report.params;
    println!(
        "sigma {:.4}  forest {:.4}  field {:.4}  building {:.4}  log-likelihood {:.4}  sweeps {}{}",
        p.sigma_hat,
        p.susceptibility_hat.forest,
        p.susceptibility_hat.field,
        p.susceptibility_hat.building,
        p.train_log_likelihood,
        report.sweeps,
        if report.converged { "" } else { " (not converged)" }
    );
    for class in &report.unseen_classes {
        println!("warning: no training PoIs of class {}; using the default susceptibility", class.name());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn run(s: &Settings) -> Result<()> {
    let spec = s.experiment_spec();
    let report = run_experiment(&spec)?;
    let dir = s.out_dir();
    emit_outputs(&report, &dir)?;
    println!("{:<11} {:>6} {:>7} {:>12} {:>12} {:>12} {:>9}", "planner", "pois", "robots", "mean", "median", "std", "improv%");
    for cell in &report.cells {
        for r in &cell.rows {
            let pct = r.pct_improvement.map(|p| format!("{p:.1}")).unwrap_or_else(|| "-".into());
            println!(
                "{:<11} {:>6} {:>7} {:>12.2} {:>12.2} {:>12.2} {:>9}",
                r.planner.name(),
                cell.n_pois,
                cell.n_robots,
                r.mean,
                r.median,
                r.std,
                pct
            );
        }
        let bad = cell.trials.iter().filter(|t| !t.replay_issues.is_empty()).count();
        if bad > 0 {
            println!("warning: {bad} traces failed replay in cell {}x{}", cell.n_pois, cell.n_robots);
        }
    }
    println!("wrote outputs to {}", dir.display());
    Ok(())
}

fn simulate(s: &Settings, scenario: Option<&Path>) -> Result<()> {
    let spec = s.experiment_spec();
    let sc = match scenario {
        Some(path) => read_scenario(path)?,
        None => generate_scenario(spec.seed_base, spec.n_pois[0], &spec.params)?,
    };
    let estimator = match &spec.estimator {
        EstimatorChoice::Oracle => Estimator::Oracle,
        EstimatorChoice::Fitted(path) => Estimator::Fitted {
            params: tcsearch::formats::read_fitted_params(path)?,
            jitter_std: 0.0,
        },
        EstimatorChoice::External(path) => {
            let maps = tcsearch::formats::read_external_likelihoods(path)?;
            match maps.get(&sc.seed) {
                Some(map) => Estimator::Fixed(map.clone()),
                None => bail!("{} has no likelihoods for seed {}", path.display(), sc.seed),
            }
        }
    };
    let planner = s.planner.as_ref().and_then(|p| p.first().copied()).unwrap_or(PlannerKind::Model);
    let config = MissionConfig {
        planner,
        planner_config: spec.planner_config.clone(),
        estimator,
        n_robots: spec.n_robots[0],
        speed: spec.speed,
        seed: sc.seed,
    };
    let trace = run_mission_with_clock(&sc, &config, &StdClock::default())?;
    let path = s.out_dir().join(format!("trace_{}_s{}.jsonl", planner.name(), sc.seed));
    write_trace(&path, &trace)?;
    let replay = replay_check(&trace, &sc);
    println!(
        "realized cost {:.4}  expected cost {:.4}  time {:.2} s  distance {:.2} m  planning calls {} (median {:.4} s)",
        trace.total_realized_cost,
        trace.total_expected_cost,
        trace.total_time,
        trace.total_distance,
        trace.planning.calls,
        trace.planning.median()
    );
    if replay.is_valid() {
        println!("replay check passed");
    } else {
        for r in &replay.reasons {
            println!("replay: {r}");
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    match cli.command {
        Command::Generate { settings: flags, graph } => generate(&settings(config, flags)?, graph),
        Command::Fit { settings: flags, input } => fit(&settings(config, flags)?, input.as_deref()),
        Command::Run { settings: flags } => run(&settings(config, flags)?),
        Command::Simulate { settings: flags, scenario } => simulate(&settings(config, flags)?, scenario.as_deref()),
    }
}
