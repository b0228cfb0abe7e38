use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use so3_observer::harness::{convergence_order_study_with, run_experiment_with, Scenario, ScenarioConfig};
use so3_observer::ExecMode;

#[derive(Parser)]
#[command(version, about = "Discrete-time attitude observer on SO(3): scenarios and studies")]
struct Cli {
    /// Run sweep points one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write `<scenario>[_<param>].csv` plus `summary.json`.
    Run {
        /// JSON scenario config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        /// Sampling interval in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Horizon in seconds.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the available scenarios with their default Δt and horizon.
    ListScenarios,
    /// Maximum deviation from the rk4 continuous observer for each Δt.
    OrderStudy {
        /// Comma-separated sampling intervals, e.g. 0.2,0.1,0.05.
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Horizon in seconds (default 20).
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write `order_study.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn fmt_norm(x: f64) -> String {
    if x.abs() < 1e4 {
        format!("{x:.6}")
    } else {
        format!("{x:.3e}")
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    };
    match cli.command {
        Command::Run {
            config,
            scenario,
            dt,
            horizon,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(s) = scenario {
                cfg.scenario = s.parse::<Scenario>()?;
            }
            if dt.is_some() {
                cfg.dt = dt;
            }
            if horizon.is_some() {
                cfg.horizon = horizon;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let exp = run_experiment_with(&cfg, mode).with_context(|| format!("running {}", cfg.scenario))?;
            let written = exp.write(&out)?;
            for s in &exp.series {
                let name = if s.label.is_empty() {
                    cfg.scenario.name()
                } else {
                    &s.label
                };
                match s.terminal() {
                    Some(t) => println!(
                        "{name}: {} rows, terminal error {:.3e}, |R̂|_F {}{}",
                        s.records.len(),
                        t.frobenius_error,
                        fmt_norm(t.estimate_norm()),
                        s.diverged_at
                            .map(|k| format!(", diverged at epoch {k}"))
                            .unwrap_or_default()
                    ),
                    None => println!("{name}: empty"),
                }
            }
            println!("wrote {} files to {}", written.len(), out.display());
        }
        Command::ListScenarios => {
            for sc in Scenario::ALL {
                println!(
                    "{:<22} dt={:<4} T={:<6} {}",
                    sc.name(),
                    sc.default_dt(),
                    sc.default_horizon(),
                    sc.description()
                );
            }
        }
        Command::OrderStudy {
            dts,
            config,
            horizon,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            cfg.horizon = horizon.or(cfg.horizon).or(Some(20.0));
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let study = convergence_order_study_with(&cfg, &dts, mode)?;
            println!("{:>10} {:>14} {:>8}", "dt", "max_dev", "ratio");
            for row in &study.rows {
                let ratio = row.ratio.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into());
                println!("{:>10} {:>14.6e} {:>8}", row.dt, row.max_deviation, ratio);
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join("order_study.json");
                std::fs::write(&path, serde_json::to_string_pretty(&study)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
