//! Domain types and the closed-form latency, bandwidth, deadline, and
//! objective arithmetic shared by every scheduler.
//!
//! All times are seconds (f64), payload sizes are bits, bandwidth is Hz.
//! Every function here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TaskId = usize;
pub type ServerId = usize;

/// One offloadable unit of work generated by a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    /// Uplink payload in bits.
    pub size_bits: f64,
    /// Downlink payload in bits.
    pub result_size_bits: f64,
    /// Arrival at the RSU (uplink transmission complete), seconds.
    pub arrival_time: f64,
    /// Server processing time, seconds.
    pub processing_time: f64,
    /// Absolute deadline by which the result must be delivered, seconds.
    pub deadline: f64,
    /// Budget from coverage entry to the deadline, seconds.
    pub range_window: f64,
    /// Instant the task becomes ready for transmission, seconds.
    pub offload_ready_time: f64,
}

impl Task {
    pub fn validate(&self) -> Result<()> {
        if !(self.size_bits > 0.0) {
            return Err(Error::InvalidInput(format!(
                "task {}: size_bits must be positive",
                self.id
            )));
        }
        if !(self.processing_time > 0.0) {
            return Err(Error::InvalidInput(format!(
                "task {}: processing_time must be positive",
                self.id
            )));
        }
        if !(self.range_window > 0.0) {
            return Err(Error::InvalidInput(format!(
                "task {}: range_window must be positive",
                self.id
            )));
        }
        if self.deadline < self.arrival_time {
            return Err(Error::InvalidInput(format!(
                "task {}: deadline precedes arrival",
                self.id
            )));
        }
        if self.result_size_bits < 0.0 {
            return Err(Error::InvalidInput(format!(
                "task {}: negative result size",
                self.id
            )));
        }
        Ok(())
    }
}

/// Final bookkeeping for one task. Every task ends exactly one of assigned
/// or dropped; the time fields are meaningful only when assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: TaskId,
    pub assigned_mec: Option<ServerId>,
    pub start_processing_time: f64,
    pub waiting_time: f64,
    pub uplink_time: f64,
    pub downlink_time: f64,
    pub e2e_latency: f64,
    pub dropped: bool,
}

impl TaskOutcome {
    pub fn dropped(task_id: TaskId) -> Self {
        Self {
            task_id,
            assigned_mec: None,
            start_processing_time: 0.0,
            waiting_time: 0.0,
            uplink_time: 0.0,
            downlink_time: 0.0,
            e2e_latency: 0.0,
            dropped: true,
        }
    }

    pub fn is_assigned(&self) -> bool {
        self.assigned_mec.is_some()
    }
}

/// Per-server availability clock and assignment log. Servers have a single
/// CPU, so logged intervals never overlap and `available_at` always equals
/// the end of the last logged assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MecState {
    pub server_id: ServerId,
    pub available_at: f64,
    pub assignment_log: Vec<(TaskId, f64, f64)>,
}

impl MecState {
    pub fn new(server_id: ServerId) -> Self {
        Self {
            server_id,
            available_at: 0.0,
            assignment_log: Vec::new(),
        }
    }

    /// Appends a processing interval and advances the availability clock.
    pub fn push_assignment(&mut self, task_id: TaskId, start: f64, end: f64) -> Result<()> {
        if end < start {
            return Err(Error::InvalidInput(format!(
                "server {}: interval end {end} precedes start {start}",
                self.server_id
            )));
        }
        if let Some(&(last_task, _, last_end)) = self.assignment_log.last() {
            if start < last_end {
                return Err(Error::Inconsistency(format!(
                    "server {}: task {} at [{start}, {end}] overlaps task {} ending {last_end}",
                    self.server_id, task_id, last_task
                )));
            }
        }
        self.assignment_log.push((task_id, start, end));
        self.available_at = end;
        Ok(())
    }
}

/// Radio-link constants shared by every transmission in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub max_bandwidth_hz: f64,
    pub guard_band_fraction: f64,
    pub tx_power_w: f64,
    pub channel_gain: f64,
    pub noise_power_w: f64,
}

impl ChannelParams {
    pub fn effective_bandwidth(&self) -> f64 {
        self.max_bandwidth_hz * (1.0 - self.guard_band_fraction)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.effective_bandwidth() > 0.0) {
            return Err(Error::InvalidInput(
                "effective bandwidth must be positive".into(),
            ));
        }
        if !(self.tx_power_w > 0.0 && self.noise_power_w > 0.0 && self.channel_gain > 0.0) {
            return Err(Error::InvalidInput(
                "tx power, noise power, and channel gain must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    /// 20 MHz carrier with a 4.6% guard band (19.08 MHz usable), 200 mW
    /// transmit power, -100 dBm noise floor, and a gain that lands the
    /// spectral efficiency at 5 bit/s/Hz.
    fn default() -> Self {
        Self {
            max_bandwidth_hz: 20e6,
            guard_band_fraction: 0.046,
            tx_power_w: 0.2,
            channel_gain: 1.55e-11,
            noise_power_w: 1e-13,
        }
    }
}

/// Trade-off weight between total latency and the dropped-task ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub lambda: f64,
}

impl ObjectiveWeights {
    pub fn new(lambda: f64) -> Result<Self> {
        let w = Self { lambda };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidInput(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        Ok(())
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self { lambda: 0.4 }
    }
}

/// Time a task spends queued at the RSU before processing starts.
pub fn waiting_time(start_processing: f64, arrival: f64) -> Result<f64> {
    let w = start_processing - arrival;
    if w < 0.0 {
        return Err(Error::Inconsistency(format!(
            "start {start_processing} precedes arrival {arrival}"
        )));
    }
    Ok(w)
}

/// Computation latency: processing plus queueing.
pub fn computation_latency(processing: f64, waiting: f64) -> f64 {
    debug_assert!(processing >= 0.0 && waiting >= 0.0);
    processing + waiting
}

/// Bandwidth granted to the task at `index` when the listed payloads
/// transmit simultaneously. A lone sender gets the full effective
/// bandwidth; concurrent senders split it proportionally to payload size.
pub fn bandwidth_share(
    concurrent_sizes: &[f64],
    effective_bandwidth: f64,
    index: usize,
) -> Result<f64> {
    if concurrent_sizes.is_empty() {
        return Err(Error::InvalidInput("empty concurrent set".into()));
    }
    if index >= concurrent_sizes.len() {
        return Err(Error::InvalidInput(format!(
            "index {index} out of bounds for {} concurrent tasks",
            concurrent_sizes.len()
        )));
    }
    if concurrent_sizes.len() == 1 {
        return Ok(effective_bandwidth);
    }
    let total: f64 = concurrent_sizes.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("zero total payload size".into()));
    }
    Ok(effective_bandwidth * concurrent_sizes[index] / total)
}

/// Shannon-capacity transmission rate in bits per second.
pub fn transmission_rate(bandwidth_hz: f64, channel: &ChannelParams) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "non-positive bandwidth {bandwidth_hz}"
        )));
    }
    let snr = channel.tx_power_w * channel.channel_gain / channel.noise_power_w;
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::InvalidInput(format!("non-positive SNR term {snr}")));
    }
    Ok(bandwidth_hz * (1.0 + snr).log2())
}

/// Seconds to move `size_bits` at `rate` bits per second.
pub fn transmission_time(size_bits: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::InvalidInput(format!("non-positive rate {rate}")));
    }
    if size_bits < 0.0 {
        return Err(Error::InvalidInput(format!(
            "negative payload {size_bits}"
        )));
    }
    Ok(size_bits / rate)
}

/// End-to-end latency: computation plus both transfer legs.
pub fn e2e_latency(computation: f64, uplink: f64, downlink: f64) -> f64 {
    debug_assert!(computation >= 0.0 && uplink >= 0.0 && downlink >= 0.0);
    computation + uplink + downlink
}

/// A task may be assigned only if its end-to-end latency fits inside the
/// coverage window. The boundary is inclusive.
pub fn is_assignable(e2e: f64, range_window: f64) -> bool {
    e2e <= range_window
}

/// Number of outcomes that ended dropped.
pub fn dropped_count(outcomes: &[TaskOutcome]) -> usize {
    outcomes.iter().filter(|o| o.dropped).count()
}

/// Dropped fraction in [0, 1].
pub fn drop_ratio(outcomes: &[TaskOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("no outcomes".into()));
    }
    Ok(dropped_count(outcomes) as f64 / outcomes.len() as f64)
}

/// Weighted score of a completed run: `lambda` times the latency sum over
/// assigned tasks plus `1 - lambda` times the drop ratio. Lower is better.
pub fn objective_value(outcomes: &[TaskOutcome], weights: ObjectiveWeights) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    let latency_sum: f64 = outcomes
        .iter()
        .filter(|o| o.is_assigned())
        .map(|o| o.e2e_latency)
        .sum();
    let ratio = dropped_count(outcomes) as f64 / outcomes.len() as f64;
    weights.lambda * latency_sum + (1.0 - weights.lambda) * ratio
}

/// Index and clock of the server that frees up first; ties go to the
/// lowest index so runs stay reproducible.
pub fn earliest_available(servers: &[MecState]) -> Option<(ServerId, f64)> {
    let mut best: Option<(ServerId, f64)> = None;
    for (idx, server) in servers.iter().enumerate() {
        match best {
            Some((_, t)) if server.available_at >= t => {}
            _ => best = Some((idx, server.available_at)),
        }
    }
    best
}

/// Longest time the task can sit in the queue and still meet its deadline.
/// Negative means the task is already infeasible.
pub fn max_waiting_time(task: &Task) -> f64 {
    task.deadline - task.processing_time - task.arrival_time
}
