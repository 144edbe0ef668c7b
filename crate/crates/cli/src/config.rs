//! Experiment-plan assembly: built-in defaults, an optional TOML config
//! file, and command-line overrides, applied in that order.
//!
//! Payload sizes are given in kb at the config surface and converted to
//! bits internally.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use vecsim_core::engine::{ExecTimeMode, SchedulerKind};
use vecsim_core::model::ChannelParams;
use vecsim_core::pso::PsoParams;
use vecsim_core::workload::WorkloadConfig;

pub const OUTPUT_DIR_ENV: &str = "VECSIM_OUT_DIR";

/// The full experiment matrix: schedulers x vehicle counts x seeds, with
/// the workload, swarm, and engine settings shared by every cell.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub vehicle_counts: Vec<usize>,
    pub schedulers: Vec<SchedulerKind>,
    pub seeds: Vec<u64>,
    pub workload: WorkloadConfig,
    pub pso: PsoParams,
    pub exec_time_mode: ExecTimeMode,
    pub lambda: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        let output_dir = std::env::var(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|_| PathBuf::from("results"));
        Self {
            vehicle_counts: vec![50, 100, 200],
            schedulers: SchedulerKind::ALL.to_vec(),
            seeds: (1..=10).collect(),
            workload: WorkloadConfig::default(),
            pso: PsoParams::default(),
            exec_time_mode: ExecTimeMode::Measured,
            lambda: 0.4,
            output_dir,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.vehicle_counts.is_empty() {
            bail!("no vehicle counts selected");
        }
        if self.schedulers.is_empty() {
            bail!("no schedulers selected");
        }
        if self.seeds.is_empty() {
            bail!("no seeds selected");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            bail!("lambda {} outside [0, 1]", self.lambda);
        }
        if let ExecTimeMode::Fixed(v) = self.exec_time_mode {
            if v < 0.0 {
                bail!("fixed exec time must be non-negative");
            }
        }
        Ok(())
    }

    pub fn job_count(&self) -> usize {
        self.vehicle_counts.len() * self.schedulers.len() * self.seeds.len()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    plan: PlanSection,
    #[serde(default)]
    workload: WorkloadSection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    pso: PsoSection,
    #[serde(default)]
    engine: EngineSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanSection {
    vehicle_counts: Option<Vec<usize>>,
    schedulers: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadSection {
    arrival_rate: Option<f64>,
    task_size_kb: Option<Vec<u64>>,
    /// Processing seconds keyed by size in kb (TOML keys are strings).
    processing_time_s: Option<BTreeMap<String, f64>>,
    result_size_ratio: Option<f64>,
    rsu_position_m: Option<f64>,
    coverage_radius_m: Option<f64>,
    approach_span_m: Option<f64>,
    speed_range_mps: Option<(f64, f64)>,
    num_servers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    max_bandwidth_hz: Option<f64>,
    guard_band_fraction: Option<f64>,
    tx_power_w: Option<f64>,
    channel_gain: Option<f64>,
    noise_power_w: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PsoSection {
    swarm_size: Option<usize>,
    max_iterations: Option<usize>,
    cognitive_coeff: Option<f64>,
    social_coeff: Option<f64>,
    inertia: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EngineSection {
    /// "measured" or "fixed".
    exec_time_mode: Option<String>,
    fixed_exec_time_s: Option<f64>,
    lambda: Option<f64>,
}

fn apply_file(plan: &mut ExperimentPlan, file: FileConfig) -> Result<()> {
    if let Some(v) = file.plan.vehicle_counts {
        plan.vehicle_counts = v;
    }
    if let Some(names) = file.plan.schedulers {
        plan.schedulers = parse_schedulers(&names)?;
    }
    if let Some(s) = file.plan.seeds {
        plan.seeds = s;
    }
    if let Some(dir) = file.plan.output_dir {
        plan.output_dir = dir;
    }

    let w = &mut plan.workload;
    if let Some(rate) = file.workload.arrival_rate {
        w.arrival_rate = rate;
    }
    if let Some(sizes_kb) = file.workload.task_size_kb {
        w.task_size_choices = sizes_kb.iter().map(|kb| kb * 1000).collect();
    }
    if let Some(table) = file.workload.processing_time_s {
        let mut bits_table = BTreeMap::new();
        for (kb, seconds) in table {
            let kb: u64 = kb
                .parse()
                .with_context(|| format!("processing_time_s key '{kb}' is not a size in kb"))?;
            bits_table.insert(kb * 1000, seconds);
        }
        w.processing_time_table = bits_table;
    }
    if let Some(r) = file.workload.result_size_ratio {
        w.result_size_ratio = r;
    }
    if let Some(x) = file.workload.rsu_position_m {
        w.rsu_position = x;
    }
    if let Some(r) = file.workload.coverage_radius_m {
        w.coverage_radius = r;
    }
    if let Some(s) = file.workload.approach_span_m {
        w.approach_span = s;
    }
    if let Some(range) = file.workload.speed_range_mps {
        w.speed_range = range;
    }
    if let Some(m) = file.workload.num_servers {
        w.num_servers = m;
    }

    let c = ChannelParams {
        max_bandwidth_hz: file
            .channel
            .max_bandwidth_hz
            .unwrap_or(w.channel.max_bandwidth_hz),
        guard_band_fraction: file
            .channel
            .guard_band_fraction
            .unwrap_or(w.channel.guard_band_fraction),
        tx_power_w: file.channel.tx_power_w.unwrap_or(w.channel.tx_power_w),
        channel_gain: file.channel.channel_gain.unwrap_or(w.channel.channel_gain),
        noise_power_w: file
            .channel
            .noise_power_w
            .unwrap_or(w.channel.noise_power_w),
    };
    w.channel = c;

    if let Some(s) = file.pso.swarm_size {
        plan.pso.swarm_size = s;
    }
    if let Some(i) = file.pso.max_iterations {
        plan.pso.max_iterations = i;
    }
    if let Some(c) = file.pso.cognitive_coeff {
        plan.pso.cognitive_coeff = c;
    }
    if let Some(c) = file.pso.social_coeff {
        plan.pso.social_coeff = c;
    }
    if let Some(w) = file.pso.inertia {
        plan.pso.inertia = w;
    }
    if let Some(s) = file.pso.seed {
        plan.pso.seed = s;
    }

    if let Some(mode) = file.engine.exec_time_mode {
        plan.exec_time_mode = parse_exec_mode(&mode, file.engine.fixed_exec_time_s)?;
    }
    if let Some(l) = file.engine.lambda {
        plan.lambda = l;
    }
    Ok(())
}

pub fn parse_schedulers(names: &[String]) -> Result<Vec<SchedulerKind>> {
    names
        .iter()
        .map(|name| {
            name.parse::<SchedulerKind>()
                .map_err(|e| anyhow::anyhow!("{e}"))
        })
        .collect()
}

pub fn parse_exec_mode(mode: &str, fixed_seconds: Option<f64>) -> Result<ExecTimeMode> {
    match mode {
        "measured" => Ok(ExecTimeMode::Measured),
        "fixed" => Ok(ExecTimeMode::Fixed(fixed_seconds.unwrap_or(0.0))),
        other => bail!("unknown exec-time mode '{other}' (expected measured|fixed)"),
    }
}

/// Builds a plan from defaults plus an optional TOML file.
pub fn load_plan(config_path: Option<&Path>) -> Result<ExperimentPlan> {
    let mut plan = ExperimentPlan::default();
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let file: FileConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        apply_file(&mut plan, file)?;
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_covers_the_full_matrix() {
        let plan = ExperimentPlan::default();
        assert_eq!(plan.job_count(), 6 * 3 * 10);
        plan.validate().unwrap();
    }

    #[test]
    fn toml_sizes_are_kb_at_the_surface() {
        let text = r#"
            [plan]
            vehicle_counts = [10]
            schedulers = ["fcfs", "cda"]
            seeds = [1, 2]

            [workload]
            task_size_kb = [100, 200]
            processing_time_s = { 100 = 0.5, 200 = 0.9 }
            arrival_rate = 2.0

            [engine]
            exec_time_mode = "fixed"
            fixed_exec_time_s = 0.01
        "#;
        let file: FileConfig = toml::from_str(text).unwrap();
        let mut plan = ExperimentPlan::default();
        apply_file(&mut plan, file).unwrap();
        assert_eq!(plan.workload.task_size_choices, vec![100_000, 200_000]);
        assert_eq!(plan.workload.processing_time_table[&100_000], 0.5);
        assert_eq!(plan.exec_time_mode, ExecTimeMode::Fixed(0.01));
        assert_eq!(plan.job_count(), 1 * 2 * 2);
    }

    #[test]
    fn unknown_scheduler_is_a_usage_error() {
        assert!(parse_schedulers(&["nope".to_string()]).is_err());
        assert!(parse_exec_mode("sometimes", None).is_err());
    }
}
