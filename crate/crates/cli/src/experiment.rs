//! Runs the experiment matrix and emits plot-ready artifacts: one summary
//! row per run, aggregate rows with Student-t confidence intervals,
//! per-run metrics JSON, JSON-lines outcome and window logs, convergence
//! CSVs, and the scenario files needed for exact replay.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use vecsim_core::engine::{run, EngineConfig, RunMetrics, SchedulerKind};
use vecsim_core::model::ObjectiveWeights;
use vecsim_core::workload::{generate_scenario, Scenario};

use crate::config::ExperimentPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct JobSpec {
    pub scheduler: SchedulerKind,
    pub vehicles: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunRow {
    pub spec: JobSpec,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub spec: JobSpec,
    pub message: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<RunRow>,
    pub failures: Vec<Failure>,
}

pub fn expand_jobs(plan: &ExperimentPlan) -> Vec<JobSpec> {
    let mut jobs = Vec::with_capacity(plan.job_count());
    for &scheduler in &plan.schedulers {
        for &vehicles in &plan.vehicle_counts {
            for &seed in &plan.seeds {
                jobs.push(JobSpec {
                    scheduler,
                    vehicles,
                    seed,
                });
            }
        }
    }
    jobs
}

pub fn scenario_for(plan: &ExperimentPlan, vehicles: usize, seed: u64) -> Result<Scenario> {
    let mut config = plan.workload.clone();
    config.num_vehicles = vehicles;
    config.seed = seed;
    Ok(generate_scenario(&config)?)
}

fn engine_config(plan: &ExperimentPlan, scheduler: SchedulerKind) -> EngineConfig {
    EngineConfig {
        exec_time_mode: plan.exec_time_mode,
        scheduler,
        weights: ObjectiveWeights {
            lambda: plan.lambda,
        },
    }
}

/// Executes every cell of the matrix. Rows come back sorted by
/// (scheduler, vehicles, seed); failures are collected per cell instead
/// of aborting the sweep. With `write_files` set the artifacts land under
/// the plan's output directory.
pub fn run_plan(plan: &ExperimentPlan, write_files: bool) -> Result<ExperimentOutcome> {
    plan.validate()?;

    // Scenarios are generated once per (vehicles, seed) and shared by all
    // schedulers so comparisons see identical workloads.
    let mut scenarios: Vec<((usize, u64), Scenario)> = Vec::new();
    for &vehicles in &plan.vehicle_counts {
        for &seed in &plan.seeds {
            scenarios.push(((vehicles, seed), scenario_for(plan, vehicles, seed)?));
        }
    }
    let scenario_of = |vehicles: usize, seed: u64| -> &Scenario {
        &scenarios
            .iter()
            .find(|((v, s), _)| *v == vehicles && *s == seed)
            .expect("scenario generated for every cell")
            .1
    };

    let jobs = expand_jobs(plan);
    let results: Vec<(JobSpec, Result<RunMetrics, String>)> = jobs
        .par_iter()
        .map(|job| {
            let scenario = scenario_of(job.vehicles, job.seed);
            let cfg = engine_config(plan, job.scheduler);
            let outcome = run(scenario, &cfg, Some(&plan.pso)).map_err(|e| e.to_string());
            (*job, outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (spec, result) in results {
        match result {
            Ok(metrics) => rows.push(RunRow { spec, metrics }),
            Err(message) => failures.push(Failure { spec, message }),
        }
    }
    rows.sort_by_key(|r| r.spec);
    failures.sort_by_key(|f| f.spec);

    if write_files {
        write_outputs(plan, &scenarios, &rows, &failures)?;
    }
    Ok(ExperimentOutcome { rows, failures })
}

fn write_outputs(
    plan: &ExperimentPlan,
    scenarios: &[((usize, u64), Scenario)],
    rows: &[RunRow],
    failures: &[Failure],
) -> Result<()> {
    let out = &plan.output_dir;
    fs::create_dir_all(out.join("runs"))?;
    fs::create_dir_all(out.join("scenarios"))?;
    fs::create_dir_all(out.join("convergence"))?;

    for ((vehicles, seed), scenario) in scenarios {
        let path = out.join(format!("scenarios/{vehicles}_{seed}.scenario.json"));
        fs::write(&path, scenario.to_json()?)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    write_summary_csv(&out.join("summary.csv"), rows)?;
    write_aggregate_csv(&out.join("aggregate.csv"), rows)?;
    if !failures.is_empty() {
        write_failures_csv(&out.join("failures.csv"), failures)?;
    }

    for row in rows {
        let stem = format!(
            "{}_{}_{}",
            row.spec.scheduler, row.spec.vehicles, row.spec.seed
        );
        fs::write(
            out.join(format!("runs/{stem}.metrics.json")),
            row.metrics.to_json()?,
        )?;

        let mut outcomes = String::new();
        for outcome in &row.metrics.per_task_outcomes {
            outcomes.push_str(&serde_json::to_string(outcome)?);
            outcomes.push('\n');
        }
        fs::write(out.join(format!("runs/{stem}.outcomes.jsonl")), outcomes)?;

        let mut windows = String::new();
        for record in &row.metrics.windows_log {
            windows.push_str(&serde_json::to_string(record)?);
            windows.push('\n');
        }
        fs::write(out.join(format!("runs/{stem}.windows.jsonl")), windows)?;

        if let Some(trace) = &row.metrics.convergence_trace {
            let path = out.join(format!("convergence/{stem}.csv"));
            let mut file = fs::File::create(&path)?;
            writeln!(file, "iteration,best_fitness")?;
            for (i, value) in trace.best_fitness.iter().enumerate() {
                writeln!(file, "{i},{value}")?;
            }
        }
    }
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "scheduler",
        "vehicles",
        "seed",
        "dropped_count",
        "drop_ratio",
        "total_e2e",
        "avg_e2e",
        "total_waiting",
        "avg_waiting",
        "exec_time_s",
        "objective",
    ])?;
    for row in rows {
        let m = &row.metrics;
        writer.write_record([
            row.spec.scheduler.to_string(),
            row.spec.vehicles.to_string(),
            row.spec.seed.to_string(),
            m.dropped_count.to_string(),
            m.drop_ratio.to_string(),
            m.total_e2e.to_string(),
            m.avg_e2e.to_string(),
            m.total_waiting.to_string(),
            m.avg_waiting.to_string(),
            m.scheduler_exec_time.to_string(),
            m.objective.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn write_failures_csv(path: &Path, failures: &[Failure]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["scheduler", "vehicles", "seed", "error"])?;
    for f in failures {
        writer.write_record([
            f.spec.scheduler.to_string(),
            f.spec.vehicles.to_string(),
            f.spec.seed.to_string(),
            f.message.clone(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Sample mean and the 95% half-width from a Student-t interval; a single
/// sample has no spread to report.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.975);
    (mean, t * se)
}

fn write_aggregate_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "scheduler",
        "vehicles",
        "runs",
        "mean_dropped_count",
        "ci95_dropped_count",
        "mean_drop_ratio",
        "ci95_drop_ratio",
        "mean_avg_e2e",
        "ci95_avg_e2e",
        "mean_avg_waiting",
        "ci95_avg_waiting",
        "mean_exec_time_s",
        "ci95_exec_time_s",
        "mean_objective",
        "ci95_objective",
    ])?;

    let mut groups: Vec<(SchedulerKind, usize)> = rows
        .iter()
        .map(|r| (r.spec.scheduler, r.spec.vehicles))
        .collect();
    groups.sort();
    groups.dedup();

    for (scheduler, vehicles) in groups {
        let group: Vec<&RunRow> = rows
            .iter()
            .filter(|r| r.spec.scheduler == scheduler && r.spec.vehicles == vehicles)
            .collect();
        let col = |f: &dyn Fn(&RunMetrics) -> f64| -> Vec<f64> {
            group.iter().map(|r| f(&r.metrics)).collect()
        };
        let dropped = mean_ci95(&col(&|m| m.dropped_count as f64));
        let ratio = mean_ci95(&col(&|m| m.drop_ratio));
        let e2e = mean_ci95(&col(&|m| m.avg_e2e));
        let waiting = mean_ci95(&col(&|m| m.avg_waiting));
        let exec = mean_ci95(&col(&|m| m.scheduler_exec_time));
        let objective = mean_ci95(&col(&|m| m.objective));
        writer.write_record([
            scheduler.to_string(),
            vehicles.to_string(),
            group.len().to_string(),
            dropped.0.to_string(),
            dropped.1.to_string(),
            ratio.0.to_string(),
            ratio.1.to_string(),
            e2e.0.to_string(),
            e2e.1.to_string(),
            waiting.0.to_string(),
            waiting.1.to_string(),
            exec.0.to_string(),
            exec.1.to_string(),
            objective.0.to_string(),
            objective.1.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
