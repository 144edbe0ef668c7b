//! Reproducible scenario generation: vehicles on a one-dimensional highway
//! segment, one task per vehicle, Poisson task generation, table-driven
//! processing times, and deadlines derived from RSU coverage geometry.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    bandwidth_share, transmission_rate, transmission_time, ChannelParams, Task, TaskId,
};

/// Two ready instants closer than this are treated as simultaneous when
/// splitting bandwidth.
pub const SIMULTANEITY_EPS: f64 = 1e-9;

/// Everything needed to produce a reproducible fleet and its tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub num_vehicles: usize,
    /// Poisson intensity of task generation, tasks per second.
    pub arrival_rate: f64,
    /// Uplink payload size choices, bits.
    pub task_size_choices: Vec<u64>,
    /// Processing seconds keyed by payload size in bits.
    pub processing_time_table: BTreeMap<u64, f64>,
    /// Downlink payload as a fraction of the uplink payload.
    pub result_size_ratio: f64,
    /// RSU location on the highway axis, meters.
    pub rsu_position: f64,
    /// Radio coverage radius, meters.
    pub coverage_radius: f64,
    /// How far before the coverage edge a vehicle may spawn, meters.
    pub approach_span: f64,
    /// Uniform (min, max) vehicle speed, meters per second.
    pub speed_range: (f64, f64),
    pub num_servers: usize,
    pub channel: ChannelParams,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        let sizes_kb = [2160u64, 3840, 6000, 8640];
        let processing = [0.8, 1.4, 2.2, 3.2];
        let task_size_choices: Vec<u64> = sizes_kb.iter().map(|kb| kb * 1000).collect();
        let processing_time_table = task_size_choices
            .iter()
            .copied()
            .zip(processing)
            .collect();
        Self {
            num_vehicles: 50,
            arrival_rate: 0.9,
            task_size_choices,
            processing_time_table,
            result_size_ratio: 1.0,
            rsu_position: 1300.0,
            coverage_radius: 1000.0,
            approach_span: 300.0,
            speed_range: (25.0, 35.0),
            num_servers: 2,
            channel: ChannelParams::default(),
            seed: 1,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_vehicles < 2 {
            return Err(Error::Config(
                "at least two vehicles are required (the first two tasks seed the servers)".into(),
            ));
        }
        if !(self.arrival_rate > 0.0) {
            return Err(Error::Config("arrival_rate must be positive".into()));
        }
        if self.task_size_choices.is_empty() {
            return Err(Error::Config("task_size_choices is empty".into()));
        }
        for size in &self.task_size_choices {
            if *size == 0 {
                return Err(Error::Config("task sizes must be positive".into()));
            }
            if !self.processing_time_table.contains_key(size) {
                return Err(Error::Config(format!(
                    "no processing time for size {size} bits"
                )));
            }
        }
        for (size, p) in &self.processing_time_table {
            if !(*p > 0.0) {
                return Err(Error::Config(format!(
                    "processing time for size {size} must be positive"
                )));
            }
        }
        if !(self.result_size_ratio > 0.0) {
            return Err(Error::Config("result_size_ratio must be positive".into()));
        }
        if !(self.coverage_radius > 0.0) {
            return Err(Error::Config("coverage_radius must be positive".into()));
        }
        if self.approach_span < 0.0 {
            return Err(Error::Config("approach_span must be non-negative".into()));
        }
        let (vmin, vmax) = self.speed_range;
        if !(vmin > 0.0) || vmax < vmin {
            return Err(Error::Config(format!(
                "invalid speed range ({vmin}, {vmax})"
            )));
        }
        if self.num_servers == 0 {
            return Err(Error::Config("num_servers must be at least 1".into()));
        }
        self.channel.validate()?;
        Ok(())
    }
}

/// A frozen, replayable workload: the task set plus the channel and server
/// population it was generated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tasks: Vec<Task>,
    pub channel: ChannelParams,
    pub num_servers: usize,
    pub config_echo: WorkloadConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.num_servers == 0 {
            return Err(Error::InvalidInput("num_servers must be at least 1".into()));
        }
        self.channel.validate()?;
        for (idx, task) in self.tasks.iter().enumerate() {
            task.validate()?;
            if task.id != idx {
                return Err(Error::InvalidInput(format!(
                    "task ids must be dense from 0; found {} at position {idx}",
                    task.id
                )));
            }
            if idx > 0 && task.arrival_time < self.tasks[idx - 1].arrival_time {
                return Err(Error::InvalidInput(format!(
                    "tasks not sorted by arrival at position {idx}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Deadline and coverage budget for a vehicle that is at `entry_position`
/// (moving toward +x) when its task is generated at `offload_time`.
///
/// A vehicle still outside coverage gets the full-chord budget measured
/// from the moment it crosses the near edge; one already inside gets the
/// remaining distance to the exit edge. Either way the returned deadline
/// is the instant the vehicle leaves coverage.
pub fn coverage_deadline(
    entry_position: f64,
    speed: f64,
    rsu_position: f64,
    radius: f64,
    offload_time: f64,
) -> Result<(f64, f64)> {
    if !(speed > 0.0) {
        return Err(Error::InvalidInput(format!("non-positive speed {speed}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("non-positive radius {radius}")));
    }
    let exit = rsu_position + radius;
    if entry_position >= exit {
        return Err(Error::InvalidInput(format!(
            "vehicle at {entry_position} never enters coverage ending at {exit}"
        )));
    }
    let near_edge = rsu_position - radius;
    let (entry_time, range_window) = if entry_position < near_edge {
        let entry_time = offload_time + (near_edge - entry_position) / speed;
        (entry_time, 2.0 * radius / speed)
    } else {
        (offload_time, (exit - entry_position) / speed)
    };
    Ok((entry_time + range_window, range_window))
}

/// Ids of tasks whose offload-ready instant coincides with `time` within
/// the default tolerance. Drives the concurrent-sender count for
/// bandwidth splitting.
pub fn concurrent_set(tasks: &[Task], time: f64) -> Vec<TaskId> {
    concurrent_set_with_eps(tasks, time, SIMULTANEITY_EPS)
}

pub fn concurrent_set_with_eps(tasks: &[Task], time: f64, eps: f64) -> Vec<TaskId> {
    tasks
        .iter()
        .filter(|t| (t.offload_ready_time - time).abs() <= eps)
        .map(|t| t.id)
        .collect()
}

/// Per-task uplink seconds under simultaneous-sender bandwidth splitting.
/// Indexed like `tasks`.
pub fn uplink_times(tasks: &[Task], channel: &ChannelParams) -> Result<Vec<f64>> {
    let ready: Vec<f64> = tasks.iter().map(|t| t.offload_ready_time).collect();
    let sizes: Vec<f64> = tasks.iter().map(|t| t.size_bits).collect();
    shared_transfer_times(&ready, &sizes, channel)
}

/// Transfer times for payloads that start at the given instants, splitting
/// bandwidth among payloads whose starts coincide.
pub(crate) fn shared_transfer_times(
    starts: &[f64],
    sizes: &[f64],
    channel: &ChannelParams,
) -> Result<Vec<f64>> {
    let effective = channel.effective_bandwidth();
    let mut times = Vec::with_capacity(starts.len());
    for i in 0..starts.len() {
        let mut group = Vec::with_capacity(4);
        group.push(sizes[i]);
        for j in 0..starts.len() {
            if j != i && (starts[j] - starts[i]).abs() <= SIMULTANEITY_EPS {
                group.push(sizes[j]);
            }
        }
        let share = bandwidth_share(&group, effective, 0)?;
        let rate = transmission_rate(share, channel)?;
        times.push(transmission_time(sizes[i], rate)?);
    }
    Ok(times)
}

/// Generates a reproducible scenario: Poisson generation instants, uniform
/// spawn positions straddling the coverage edge, sizes drawn from the
/// configured choices, and coverage-derived deadlines. The same seed
/// always produces the identical task list.
pub fn generate_scenario(config: &WorkloadConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let spawn_low = config.rsu_position - config.coverage_radius - config.approach_span;
    let spawn_high = config.rsu_position;
    let (vmin, vmax) = config.speed_range;

    struct Proto {
        gen_index: usize,
        size_bits: f64,
        processing: f64,
        ready: f64,
        deadline: f64,
        range_window: f64,
    }

    let mut protos = Vec::with_capacity(config.num_vehicles);
    let mut t_gen = 0.0;
    for gen_index in 0..config.num_vehicles {
        // Inverse-CDF exponential gap keeps the draw count per vehicle fixed.
        let u: f64 = rng.gen();
        t_gen += -(1.0 - u).ln() / config.arrival_rate;

        let speed = if vmax > vmin {
            rng.gen_range(vmin..vmax)
        } else {
            vmin
        };
        let position = if spawn_high > spawn_low {
            rng.gen_range(spawn_low..spawn_high)
        } else {
            spawn_low
        };
        let size = config.task_size_choices[rng.gen_range(0..config.task_size_choices.len())];
        let processing = config.processing_time_table[&size];

        let (deadline, range_window) = coverage_deadline(
            position,
            speed,
            config.rsu_position,
            config.coverage_radius,
            t_gen,
        )?;
        protos.push(Proto {
            gen_index,
            size_bits: size as f64,
            processing,
            ready: deadline - range_window,
            deadline,
            range_window,
        });
    }

    let ready: Vec<f64> = protos.iter().map(|p| p.ready).collect();
    let sizes: Vec<f64> = protos.iter().map(|p| p.size_bits).collect();
    let uplink = shared_transfer_times(&ready, &sizes, &config.channel)?;

    let mut tasks: Vec<Task> = protos
        .iter()
        .enumerate()
        .map(|(i, p)| Task {
            id: p.gen_index,
            size_bits: p.size_bits,
            result_size_bits: p.size_bits * config.result_size_ratio,
            arrival_time: p.ready + uplink[i],
            processing_time: p.processing,
            deadline: p.deadline,
            range_window: p.range_window,
            offload_ready_time: p.ready,
        })
        .collect();

    tasks.sort_by(|a, b| {
        a.arrival_time
            .total_cmp(&b.arrival_time)
            .then(a.id.cmp(&b.id))
    });
    for (idx, task) in tasks.iter_mut().enumerate() {
        task.id = idx;
    }

    let scenario = Scenario {
        tasks,
        channel: config.channel,
        num_servers: config.num_servers,
        config_echo: config.clone(),
    };
    scenario.validate()?;
    Ok(scenario)
}
