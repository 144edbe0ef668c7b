use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vecsim_cli::config::{load_plan, parse_exec_mode, parse_schedulers, ExperimentPlan};
use vecsim_cli::experiment::{run_plan, scenario_for};
use vecsim_core::engine::{run, EngineConfig, ExecTimeMode, SchedulerKind};
use vecsim_core::model::ObjectiveWeights;
use vecsim_core::pso::PsoParams;
use vecsim_core::workload::Scenario;

/// Deadline-constrained task-offloading simulator for highway vehicles and
/// roadside MEC servers.
#[derive(Parser)]
#[command(name = "vecsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOverrides {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Execution-time accounting: measured | fixed.
    #[arg(long)]
    exec_time_mode: Option<String>,
    /// Seconds charged per decision in fixed mode.
    #[arg(long)]
    fixed_exec_time: Option<f64>,
    /// Output directory (defaults to $VECSIM_OUT_DIR or ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full scheduler x vehicle-count x seed matrix.
    Experiment {
        #[command(flatten)]
        common: CommonOverrides,
        /// Vehicle counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        vehicles: Option<Vec<usize>>,
        /// Schedulers, comma separated
        /// (fcfs|sdf|cda|off_sta_pso|on_sta_pso|on_dyn_pso).
        #[arg(long, value_delimiter = ',')]
        schedulers: Option<Vec<String>>,
        /// Seeds, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Run one scheduler on one generated scenario and print a summary.
    Run {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        scheduler: String,
        #[arg(long, default_value_t = 50)]
        vehicles: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Generate a scenario file for later replay.
    Generate {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long, default_value_t = 50)]
        vehicles: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Scenario file to write.
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Re-run a saved scenario deterministically and print metrics JSON.
    Replay {
        /// Scenario file produced by `generate` or an experiment run.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        scheduler: String,
        /// Seconds charged per decision (replay always uses fixed mode).
        #[arg(long, default_value_t = 0.0)]
        fixed_exec_time: f64,
        /// Swarm seed for the PSO regimes.
        #[arg(long)]
        pso_seed: Option<u64>,
        /// Also write the metrics JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_common(plan: &mut ExperimentPlan, common: &CommonOverrides) -> Result<()> {
    if let Some(mode) = &common.exec_time_mode {
        plan.exec_time_mode = parse_exec_mode(mode, common.fixed_exec_time)?;
    } else if let Some(fixed) = common.fixed_exec_time {
        plan.exec_time_mode = ExecTimeMode::Fixed(fixed);
    }
    if let Some(dir) = &common.out {
        plan.output_dir = dir.clone();
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Experiment {
            common,
            vehicles,
            schedulers,
            seeds,
        } => {
            let mut plan = load_plan(common.config.as_deref())?;
            apply_common(&mut plan, &common)?;
            if let Some(v) = vehicles {
                plan.vehicle_counts = v;
            }
            if let Some(names) = schedulers {
                plan.schedulers = parse_schedulers(&names)?;
            }
            if let Some(s) = seeds {
                plan.seeds = s;
            }

            let outcome = run_plan(&plan, true)?;
            println!(
                "{} runs completed, {} failed; outputs in {}",
                outcome.rows.len(),
                outcome.failures.len(),
                plan.output_dir.display()
            );
            for failure in &outcome.failures {
                eprintln!(
                    "failed: {} vehicles={} seed={}: {}",
                    failure.spec.scheduler,
                    failure.spec.vehicles,
                    failure.spec.seed,
                    failure.message
                );
            }
            if !outcome.failures.is_empty() {
                bail!("{} runs failed", outcome.failures.len());
            }
            Ok(())
        }
        Command::Run {
            common,
            scheduler,
            vehicles,
            seed,
        } => {
            let mut plan = load_plan(common.config.as_deref())?;
            apply_common(&mut plan, &common)?;
            plan.schedulers = parse_schedulers(&[scheduler])?;
            plan.vehicle_counts = vec![vehicles];
            plan.seeds = vec![seed];

            let outcome = run_plan(&plan, true)?;
            if let Some(failure) = outcome.failures.first() {
                bail!("run failed: {}", failure.message);
            }
            let row = &outcome.rows[0];
            let m = &row.metrics;
            println!(
                "{} vehicles={vehicles} seed={seed}: dropped {}/{} ({:.3}), avg e2e {:.4}s, \
                 avg waiting {:.4}s, exec {:.6}s, objective {:.4}",
                row.spec.scheduler,
                m.dropped_count,
                m.num_tasks,
                m.drop_ratio,
                m.avg_e2e,
                m.avg_waiting,
                m.scheduler_exec_time,
                m.objective
            );
            Ok(())
        }
        Command::Generate {
            common,
            vehicles,
            seed,
            scenario,
        } => {
            let mut plan = load_plan(common.config.as_deref())?;
            apply_common(&mut plan, &common)?;
            let generated = scenario_for(&plan, vehicles, seed)?;
            std::fs::write(&scenario, generated.to_json()?)
                .with_context(|| format!("writing {}", scenario.display()))?;
            println!(
                "wrote {} ({} tasks, seed {seed})",
                scenario.display(),
                generated.tasks.len()
            );
            Ok(())
        }
        Command::Replay {
            scenario,
            scheduler,
            fixed_exec_time,
            pso_seed,
            out,
        } => {
            let text = std::fs::read_to_string(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let scenario: Scenario = Scenario::from_json(&text)
                .with_context(|| "parsing scenario file".to_string())?;
            let kind: SchedulerKind = scheduler
                .parse()
                .map_err(|e: vecsim_core::Error| anyhow::anyhow!("{e}"))?;
            let cfg = EngineConfig {
                exec_time_mode: ExecTimeMode::Fixed(fixed_exec_time),
                scheduler: kind,
                weights: ObjectiveWeights::default(),
            };
            let mut params = PsoParams::default();
            if let Some(seed) = pso_seed {
                params.seed = seed;
            }
            let metrics = run(&scenario, &cfg, Some(&params))?;
            let json = metrics.to_json()?;
            if let Some(path) = out {
                std::fs::write(&path, &json)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{json}");
            Ok(())
        }
    }
}
