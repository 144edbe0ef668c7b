//! Event-driven execution: bootstrap assignment of the first tasks,
//! decision-window construction, scheduler invocation with execution-time
//! accounting, availability updates, and metric aggregation.
//!
//! `score_order` is the single source of truth for what a task sequence
//! costs; the swarm fitness and the static regimes both go through it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    self, bandwidth_share, computation_latency, e2e_latency, earliest_available, is_assignable,
    transmission_rate, transmission_time, ChannelParams, MecState, ObjectiveWeights, ServerId,
    Task, TaskId, TaskOutcome,
};
use crate::pso::{self, ConvergenceTrace, FitnessMode, PsoParams};
use crate::sched::{
    schedule_cda, schedule_fcfs, schedule_sdf, DecisionWindow, SchedulerDecision,
};
use crate::workload::{uplink_times, Scenario, SIMULTANEITY_EPS};

/// How the scheduler's own execution time is charged to task starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "seconds", rename_all = "snake_case")]
pub enum ExecTimeMode {
    /// Wall clock of each decision, measured while the run executes.
    Measured,
    /// A configured constant per decision; keeps runs bit-reproducible.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Fcfs,
    Sdf,
    Cda,
    OffStaPso,
    OnStaPso,
    OnDynPso,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 6] = [
        SchedulerKind::Fcfs,
        SchedulerKind::Sdf,
        SchedulerKind::Cda,
        SchedulerKind::OffStaPso,
        SchedulerKind::OnStaPso,
        SchedulerKind::OnDynPso,
    ];

    pub fn needs_pso_params(&self) -> bool {
        matches!(
            self,
            SchedulerKind::OffStaPso | SchedulerKind::OnStaPso | SchedulerKind::OnDynPso
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerKind::Fcfs => "fcfs",
            SchedulerKind::Sdf => "sdf",
            SchedulerKind::Cda => "cda",
            SchedulerKind::OffStaPso => "off_sta_pso",
            SchedulerKind::OnStaPso => "on_sta_pso",
            SchedulerKind::OnDynPso => "on_dyn_pso",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcfs" => Ok(SchedulerKind::Fcfs),
            "sdf" => Ok(SchedulerKind::Sdf),
            "cda" => Ok(SchedulerKind::Cda),
            "off_sta_pso" => Ok(SchedulerKind::OffStaPso),
            "on_sta_pso" => Ok(SchedulerKind::OnStaPso),
            "on_dyn_pso" => Ok(SchedulerKind::OnDynPso),
            other => Err(Error::Config(format!("unknown scheduler '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub exec_time_mode: ExecTimeMode,
    pub scheduler: SchedulerKind,
    pub weights: ObjectiveWeights,
}

impl EngineConfig {
    pub fn new(scheduler: SchedulerKind) -> Self {
        Self {
            exec_time_mode: ExecTimeMode::Measured,
            scheduler,
            weights: ObjectiveWeights::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if let ExecTimeMode::Fixed(v) = self.exec_time_mode {
            if v < 0.0 {
                return Err(Error::Config(format!("negative fixed exec time {v}")));
            }
        }
        Ok(())
    }
}

/// One loop iteration of a dynamic run: the window that was built, the
/// decision taken on it (if any), and the execution time charged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_index: usize,
    pub span_start: f64,
    pub span_end: f64,
    pub eligible: Vec<TaskId>,
    pub excluded_infeasible: Vec<TaskId>,
    pub decision: Option<SchedulerDecision>,
    pub exec_time: f64,
}

/// Aggregated result of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scheduler: SchedulerKind,
    pub num_tasks: usize,
    pub assigned_count: usize,
    pub dropped_count: usize,
    pub drop_ratio: f64,
    pub total_e2e: f64,
    pub avg_e2e: f64,
    pub total_waiting: f64,
    pub avg_waiting: f64,
    pub objective: f64,
    /// Latency weight the objective was computed with.
    pub lambda: f64,
    /// Total seconds charged to scheduler decisions over the whole run.
    pub scheduler_exec_time: f64,
    /// Static swarm regimes record their per-iteration best here; the
    /// dynamic swarm regime records each window's best local fitness.
    pub convergence_trace: Option<ConvergenceTrace>,
    pub per_task_outcomes: Vec<TaskOutcome>,
    pub windows_log: Vec<WindowRecord>,
}

impl RunMetrics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Borrowed view of the tasks a sequence is scored against, with the
/// server state and transfer context the walk starts from.
#[derive(Debug, Clone, Copy)]
pub struct SliceContext<'a> {
    pub tasks: &'a [Task],
    /// Uplink seconds per slice index.
    pub uplink: &'a [f64],
    pub channel: &'a ChannelParams,
    pub weights: ObjectiveWeights,
    /// Availability clock per server at the start of the walk.
    pub init_available: &'a [f64],
    /// Downlink starts already committed by earlier assignments, as
    /// (instant, result bits); new completions share bandwidth with these.
    pub prior_completions: &'a [(f64, f64)],
}

/// Reusable buffers for the scoring walk; one per search keeps the swarm's
/// inner loop allocation-free.
#[derive(Debug, Default)]
pub struct ScoreScratch {
    avail: Vec<f64>,
    completions: Vec<(f64, f64)>,
}

impl ScoreScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderScore {
    pub objective: f64,
    pub outcomes: Vec<TaskOutcome>,
}

fn downlink_time(
    completion: f64,
    result_bits: f64,
    prior: &[(f64, f64)],
    local: &[(f64, f64)],
    channel: &ChannelParams,
) -> Result<f64> {
    let mut group = Vec::with_capacity(4);
    group.push(result_bits);
    for &(t, bits) in prior.iter().chain(local.iter()) {
        if (t - completion).abs() <= SIMULTANEITY_EPS {
            group.push(bits);
        }
    }
    let share = bandwidth_share(&group, channel.effective_bandwidth(), 0)?;
    let rate = transmission_rate(share, channel)?;
    transmission_time(result_bits, rate)
}

fn walk_order(
    order: &[usize],
    ctx: &SliceContext,
    first_exec_time: f64,
    scratch: &mut ScoreScratch,
    mut outcomes: Option<&mut Vec<TaskOutcome>>,
) -> Result<(usize, f64)> {
    scratch.avail.clear();
    scratch.avail.extend_from_slice(ctx.init_available);
    scratch.completions.clear();

    let mut dropped = 0usize;
    let mut e2e_sum = 0.0;
    for (slot, &i) in order.iter().enumerate() {
        let task = &ctx.tasks[i];
        let mut server = 0usize;
        for (j, &t) in scratch.avail.iter().enumerate() {
            if t < scratch.avail[server] {
                server = j;
            }
        }
        let exec = if slot == 0 { first_exec_time } else { 0.0 };
        let start = scratch.avail[server].max(task.arrival_time) + exec;
        let wait = start - task.arrival_time;
        let uplink = ctx.uplink[i];
        let completion = start + task.processing_time;
        let down = downlink_time(
            completion,
            task.result_size_bits,
            ctx.prior_completions,
            &scratch.completions,
            ctx.channel,
        )?;
        let e2e = e2e_latency(computation_latency(task.processing_time, wait), uplink, down);
        if is_assignable(e2e, task.range_window) {
            scratch.avail[server] = completion;
            scratch.completions.push((completion, task.result_size_bits));
            e2e_sum += e2e;
            if let Some(out) = outcomes.as_deref_mut() {
                out.push(TaskOutcome {
                    task_id: task.id,
                    assigned_mec: Some(server),
                    start_processing_time: start,
                    waiting_time: wait,
                    uplink_time: uplink,
                    downlink_time: down,
                    e2e_latency: e2e,
                    dropped: false,
                });
            }
        } else {
            dropped += 1;
            if let Some(out) = outcomes.as_deref_mut() {
                out.push(TaskOutcome::dropped(task.id));
            }
        }
    }
    Ok((dropped, e2e_sum))
}

/// Objective of assigning the slice's tasks in `order` onto the
/// earliest-available server, with `first_exec_time` charged to the first
/// slot's start. Tasks that would miss their coverage window are dropped
/// in place and score through the drop term instead.
pub fn score_order_value(
    order: &[usize],
    ctx: &SliceContext,
    first_exec_time: f64,
    scratch: &mut ScoreScratch,
) -> Result<f64> {
    let (dropped, e2e_sum) = walk_order(order, ctx, first_exec_time, scratch, None)?;
    if order.is_empty() {
        return Ok(0.0);
    }
    let ratio = dropped as f64 / order.len() as f64;
    Ok(ctx.weights.lambda * e2e_sum + (1.0 - ctx.weights.lambda) * ratio)
}

/// Like [`score_order_value`] but also materializes the per-task outcomes
/// in visit order.
pub fn score_order(
    order: &[usize],
    ctx: &SliceContext,
    first_exec_time: f64,
) -> Result<OrderScore> {
    let mut scratch = ScoreScratch::new();
    let mut outcomes = Vec::with_capacity(order.len());
    let (dropped, e2e_sum) = walk_order(order, ctx, first_exec_time, &mut scratch, Some(&mut outcomes))?;
    let objective = if order.is_empty() {
        0.0
    } else {
        ctx.weights.lambda * e2e_sum
            + (1.0 - ctx.weights.lambda) * (dropped as f64 / order.len() as f64)
    };
    Ok(OrderScore { objective, outcomes })
}

/// Splits the pending tasks that have arrived by `t_e_av` into the ones
/// that can still meet their deadlines (eligible, assuming a start at
/// `t_e_av + exec_hint`) and the ones that cannot (excluded, to be
/// dropped). Tasks that have not arrived yet stay out of the window.
/// `comm_times` carries each pending task's transfer budget (uplink plus
/// nominal downlink), indexed like `pending`.
pub fn build_window(
    pending: &[Task],
    comm_times: &[f64],
    t_e_av: f64,
    span_start: f64,
    window_index: usize,
    exec_hint: f64,
) -> DecisionWindow {
    debug_assert_eq!(pending.len(), comm_times.len());
    let mut eligible = Vec::new();
    let mut excluded = Vec::new();
    for (task, &comm) in pending.iter().zip(comm_times) {
        if task.arrival_time > t_e_av {
            continue;
        }
        let projected_wait = t_e_av + exec_hint - task.arrival_time;
        let budget = task.range_window - task.processing_time - comm;
        if projected_wait <= budget {
            eligible.push(*task);
        } else {
            excluded.push(task.id);
        }
    }
    DecisionWindow {
        window_index,
        span_start,
        span_end: t_e_av,
        eligible,
        excluded_infeasible: excluded,
    }
}

/// Books the chosen outcome onto its server and returns the new earliest
/// availability. Fails if the interval would overlap the server's log.
pub fn advance_after_assignment(
    servers: &mut [MecState],
    chosen: &TaskOutcome,
    processing_time: f64,
) -> Result<(ServerId, f64)> {
    let server = chosen
        .assigned_mec
        .ok_or_else(|| Error::InvalidInput("outcome is not assigned".into()))?;
    if server >= servers.len() {
        return Err(Error::InvalidInput(format!("no server {server}")));
    }
    let start = chosen.start_processing_time;
    servers[server].push_assignment(chosen.task_id, start, start + processing_time)?;
    earliest_available(servers)
        .ok_or_else(|| Error::InvalidInput("no servers".into()))
}

pub(crate) enum DynPolicy<'a> {
    Fcfs,
    Sdf,
    Cda,
    WindowPso(&'a PsoParams),
}

/// Deterministically derives a per-window seed from the master seed.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct TransferTables {
    uplink: Vec<f64>,
    /// Uplink plus full-bandwidth downlink, per task id; used for window
    /// eligibility where the eventual downlink share is not yet known.
    comm_nominal: Vec<f64>,
}

fn transfer_tables(scenario: &Scenario) -> Result<TransferTables> {
    let uplink = uplink_times(&scenario.tasks, &scenario.channel)?;
    let full_rate = transmission_rate(scenario.channel.effective_bandwidth(), &scenario.channel)?;
    let mut comm_nominal = Vec::with_capacity(scenario.tasks.len());
    for (task, &up) in scenario.tasks.iter().zip(&uplink) {
        comm_nominal.push(up + transmission_time(task.result_size_bits, full_rate)?);
    }
    Ok(TransferTables { uplink, comm_nominal })
}

struct AttemptedSlot {
    outcome: TaskOutcome,
    feasible: bool,
}

/// Times the chosen task at `start` against its coverage window; produces
/// either the assigned outcome or a dropped one when the execution-time
/// charge (or a shared downlink) pushed it past the deadline.
fn attempt_assignment(
    task: &Task,
    server: ServerId,
    start: f64,
    uplink: f64,
    prior_completions: &[(f64, f64)],
    channel: &ChannelParams,
) -> Result<AttemptedSlot> {
    let wait = model::waiting_time(start, task.arrival_time)?;
    let completion = start + task.processing_time;
    let down = downlink_time(
        completion,
        task.result_size_bits,
        prior_completions,
        &[],
        channel,
    )?;
    let e2e = e2e_latency(computation_latency(task.processing_time, wait), uplink, down);
    if is_assignable(e2e, task.range_window) {
        Ok(AttemptedSlot {
            outcome: TaskOutcome {
                task_id: task.id,
                assigned_mec: Some(server),
                start_processing_time: start,
                waiting_time: wait,
                uplink_time: uplink,
                downlink_time: down,
                e2e_latency: e2e,
                dropped: false,
            },
            feasible: true,
        })
    } else {
        Ok(AttemptedSlot {
            outcome: TaskOutcome::dropped(task.id),
            feasible: false,
        })
    }
}

pub(crate) fn run_dynamic(
    scenario: &Scenario,
    policy: DynPolicy<'_>,
    cfg: &EngineConfig,
) -> Result<RunMetrics> {
    scenario.validate()?;
    cfg.validate()?;
    let tasks = &scenario.tasks;
    let n = tasks.len();
    let tables = transfer_tables(scenario)?;
    let exec_hint = match cfg.exec_time_mode {
        ExecTimeMode::Fixed(v) => v,
        ExecTimeMode::Measured => 0.0,
    };

    let mut servers: Vec<MecState> = (0..scenario.num_servers).map(MecState::new).collect();
    let mut outcomes: Vec<Option<TaskOutcome>> = vec![None; n];
    let mut completions: Vec<(f64, f64)> = Vec::new();
    let mut span_start = 0.0;

    // The first tasks, one per server in arrival order, start the moment
    // they arrive; a task that cannot fit even with zero waiting is
    // dropped and the next arrival takes its place.
    let mut seeded = 0usize;
    for task in tasks {
        if seeded >= servers.len() {
            break;
        }
        let slot = attempt_assignment(
            task,
            seeded,
            task.arrival_time,
            tables.uplink[task.id],
            &completions,
            &scenario.channel,
        )?;
        if slot.feasible {
            servers[seeded].push_assignment(
                task.id,
                slot.outcome.start_processing_time,
                slot.outcome.start_processing_time + task.processing_time,
            )?;
            completions.push((
                slot.outcome.start_processing_time + task.processing_time,
                task.result_size_bits,
            ));
            span_start = slot.outcome.start_processing_time;
            seeded += 1;
        }
        outcomes[task.id] = Some(slot.outcome);
    }

    let mut windows: Vec<WindowRecord> = Vec::new();
    let mut window_index = 0usize;
    let mut total_exec = 0.0;
    let mut window_trace: Vec<f64> = Vec::new();

    loop {
        let pending: Vec<&Task> = tasks
            .iter()
            .filter(|t| outcomes[t.id].is_none())
            .collect();
        if pending.is_empty() {
            break;
        }
        let (target, t_av) =
            earliest_available(&servers).ok_or_else(|| Error::Config("no servers".into()))?;

        let pending_tasks: Vec<Task> = pending.iter().map(|t| **t).collect();
        let pending_comm: Vec<f64> = pending.iter().map(|t| tables.comm_nominal[t.id]).collect();

        let mut t_dec = t_av;
        let mut window = build_window(
            &pending_tasks,
            &pending_comm,
            t_dec,
            span_start,
            window_index,
            exec_hint,
        );
        if window.eligible.is_empty() && window.excluded_infeasible.is_empty() {
            // Idle server: jump to the next arrival instead of spinning.
            let next_arrival = pending
                .iter()
                .map(|t| t.arrival_time)
                .fold(f64::INFINITY, f64::min);
            t_dec = t_dec.max(next_arrival);
            window = build_window(
                &pending_tasks,
                &pending_comm,
                t_dec,
                span_start,
                window_index,
                exec_hint,
            );
        }

        for &id in &window.excluded_infeasible {
            outcomes[id] = Some(TaskOutcome::dropped(id));
        }

        if window.eligible.is_empty() {
            windows.push(WindowRecord {
                window_index,
                span_start,
                span_end: t_dec,
                eligible: vec![],
                excluded_infeasible: window.excluded_infeasible.clone(),
                decision: None,
                exec_time: 0.0,
            });
            window_index += 1;
            continue;
        }

        let (decision, exec) = match &policy {
            DynPolicy::Fcfs | DynPolicy::Sdf | DynPolicy::Cda => {
                let decide = || match &policy {
                    DynPolicy::Fcfs => schedule_fcfs(&window, target),
                    DynPolicy::Sdf => schedule_sdf(&window, target),
                    DynPolicy::Cda => schedule_cda(&window, t_dec, target),
                    DynPolicy::WindowPso(_) => unreachable!(),
                };
                match cfg.exec_time_mode {
                    ExecTimeMode::Measured => {
                        let wall = Instant::now();
                        let d = decide();
                        (d, wall.elapsed().as_secs_f64())
                    }
                    ExecTimeMode::Fixed(v) => (decide(), v),
                }
            }
            DynPolicy::WindowPso(base_params) => {
                let mut params = (*base_params).clone();
                params.seed = mix_seed(base_params.seed, window_index as u64);
                let uplink_slice: Vec<f64> =
                    window.eligible.iter().map(|t| tables.uplink[t.id]).collect();
                let init_avail: Vec<f64> = servers.iter().map(|s| s.available_at).collect();
                let ctx = SliceContext {
                    tasks: &window.eligible,
                    uplink: &uplink_slice,
                    channel: &scenario.channel,
                    weights: cfg.weights,
                    init_available: &init_avail,
                    prior_completions: &completions,
                };
                let wall = Instant::now();
                let out = pso::pso_run(
                    &window.eligible,
                    &params,
                    &ctx,
                    FitnessMode::Online {
                        exec_time: exec_hint,
                    },
                )?;
                let measured = wall.elapsed().as_secs_f64();
                let exec = match cfg.exec_time_mode {
                    ExecTimeMode::Measured => measured,
                    ExecTimeMode::Fixed(v) => v,
                };
                let head = out.best_order[0];
                let per_candidate_costs: BTreeMap<TaskId, f64> = out
                    .per_head_best
                    .iter()
                    .map(|(&idx, &fit)| (window.eligible[idx].id, fit))
                    .collect();
                window_trace.push(out.best_fitness);
                let decision = SchedulerDecision {
                    chosen_task_id: window.eligible[head].id,
                    target_server: target,
                    decision_cost: out.best_fitness,
                    per_candidate_costs,
                };
                (Some(decision), exec)
            }
        };

        let decision = decision.ok_or_else(|| {
            Error::Inconsistency("scheduler returned no decision for a non-empty window".into())
        })?;
        total_exec += exec;

        let chosen = &tasks[decision.chosen_task_id];
        debug_assert_eq!(chosen.id, decision.chosen_task_id);
        let start = t_dec + exec;
        let slot = attempt_assignment(
            chosen,
            target,
            start,
            tables.uplink[chosen.id],
            &completions,
            &scenario.channel,
        )?;
        if slot.feasible {
            advance_after_assignment(&mut servers, &slot.outcome, chosen.processing_time)?;
            completions.push((start + chosen.processing_time, chosen.result_size_bits));
            span_start = start;
        }
        outcomes[chosen.id] = Some(slot.outcome);

        windows.push(WindowRecord {
            window_index,
            span_start: window.span_start,
            span_end: t_dec,
            eligible: window.eligible.iter().map(|t| t.id).collect(),
            excluded_infeasible: window.excluded_infeasible.clone(),
            decision: Some(decision),
            exec_time: exec,
        });
        window_index += 1;
    }

    let outcomes: Vec<TaskOutcome> = outcomes
        .into_iter()
        .map(|o| o.expect("every task resolved"))
        .collect();
    let trace = match &policy {
        DynPolicy::WindowPso(_) => Some(ConvergenceTrace {
            best_fitness: window_trace,
        }),
        _ => None,
    };
    Ok(assemble_metrics(
        scheduler_kind_of(&policy),
        outcomes,
        windows,
        total_exec,
        trace,
        cfg.weights,
    ))
}

fn scheduler_kind_of(policy: &DynPolicy<'_>) -> SchedulerKind {
    match policy {
        DynPolicy::Fcfs => SchedulerKind::Fcfs,
        DynPolicy::Sdf => SchedulerKind::Sdf,
        DynPolicy::Cda => SchedulerKind::Cda,
        DynPolicy::WindowPso(_) => SchedulerKind::OnDynPso,
    }
}

pub(crate) fn assemble_metrics(
    scheduler: SchedulerKind,
    outcomes: Vec<TaskOutcome>,
    windows_log: Vec<WindowRecord>,
    scheduler_exec_time: f64,
    convergence_trace: Option<ConvergenceTrace>,
    weights: ObjectiveWeights,
) -> RunMetrics {
    let num_tasks = outcomes.len();
    let dropped = model::dropped_count(&outcomes);
    let assigned = num_tasks - dropped;
    let total_e2e: f64 = outcomes
        .iter()
        .filter(|o| o.is_assigned())
        .map(|o| o.e2e_latency)
        .sum();
    let total_waiting: f64 = outcomes
        .iter()
        .filter(|o| o.is_assigned())
        .map(|o| o.waiting_time)
        .sum();
    let objective = model::objective_value(&outcomes, weights);
    RunMetrics {
        scheduler,
        num_tasks,
        assigned_count: assigned,
        dropped_count: dropped,
        drop_ratio: if num_tasks == 0 {
            0.0
        } else {
            dropped as f64 / num_tasks as f64
        },
        total_e2e,
        avg_e2e: if assigned == 0 {
            0.0
        } else {
            total_e2e / assigned as f64
        },
        total_waiting,
        avg_waiting: if assigned == 0 {
            0.0
        } else {
            total_waiting / assigned as f64
        },
        objective,
        lambda: weights.lambda,
        scheduler_exec_time,
        convergence_trace,
        per_task_outcomes: outcomes,
        windows_log,
    }
}

/// Runs one scenario under the configured scheduler. PSO parameters are
/// required for the swarm regimes and ignored otherwise.
pub fn run(
    scenario: &Scenario,
    cfg: &EngineConfig,
    pso_params: Option<&PsoParams>,
) -> Result<RunMetrics> {
    cfg.validate()?;
    let need = cfg.scheduler.needs_pso_params();
    let params = match (need, pso_params) {
        (true, None) => {
            return Err(Error::Config(format!(
                "scheduler {} requires PSO parameters",
                cfg.scheduler
            )))
        }
        (_, p) => p,
    };
    match cfg.scheduler {
        SchedulerKind::Fcfs => run_dynamic(scenario, DynPolicy::Fcfs, cfg),
        SchedulerKind::Sdf => run_dynamic(scenario, DynPolicy::Sdf, cfg),
        SchedulerKind::Cda => run_dynamic(scenario, DynPolicy::Cda, cfg),
        SchedulerKind::OnDynPso => {
            run_dynamic(scenario, DynPolicy::WindowPso(params.unwrap()), cfg)
        }
        SchedulerKind::OffStaPso => pso::run_off_sta_pso(scenario, params.unwrap(), cfg),
        SchedulerKind::OnStaPso => pso::run_on_sta_pso(scenario, params.unwrap(), cfg),
    }
}

const REL_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= REL_TOL * scale
}

/// Checks every bookkeeping invariant a finished run must satisfy:
/// assigned-implies-feasible, single assignment, disjoint server
/// intervals, dropped + assigned partition, and the aggregate equalities.
pub fn verify_consistency(scenario: &Scenario, metrics: &RunMetrics) -> Result<()> {
    let n = scenario.tasks.len();
    let fail = |msg: String| Err(Error::Inconsistency(msg));

    if metrics.per_task_outcomes.len() != n {
        return fail(format!(
            "{} outcomes for {n} tasks",
            metrics.per_task_outcomes.len()
        ));
    }
    let mut assigned = 0usize;
    let mut dropped = 0usize;
    let mut total_e2e = 0.0;
    let mut total_waiting = 0.0;
    let mut per_server: BTreeMap<ServerId, Vec<(f64, f64, TaskId)>> = BTreeMap::new();
    for (idx, outcome) in metrics.per_task_outcomes.iter().enumerate() {
        if outcome.task_id != idx {
            return fail(format!("outcome {idx} carries task id {}", outcome.task_id));
        }
        let task = &scenario.tasks[idx];
        if outcome.dropped == outcome.is_assigned() {
            return fail(format!("task {idx} is not exactly one of assigned/dropped"));
        }
        if let Some(server) = outcome.assigned_mec {
            assigned += 1;
            if server >= scenario.num_servers {
                return fail(format!("task {idx} assigned to unknown server {server}"));
            }
            if outcome.waiting_time < -1e-12 {
                return fail(format!("task {idx} has negative waiting time"));
            }
            if !close(
                outcome.waiting_time,
                outcome.start_processing_time - task.arrival_time,
            ) {
                return fail(format!("task {idx} waiting time does not match its start"));
            }
            let recomputed = e2e_latency(
                computation_latency(task.processing_time, outcome.waiting_time),
                outcome.uplink_time,
                outcome.downlink_time,
            );
            if !close(recomputed, outcome.e2e_latency) {
                return fail(format!("task {idx} e2e does not recompose from its parts"));
            }
            if !is_assignable(outcome.e2e_latency, task.range_window + 1e-9) {
                return fail(format!(
                    "task {idx} assigned with e2e {} beyond window {}",
                    outcome.e2e_latency, task.range_window
                ));
            }
            per_server.entry(server).or_default().push((
                outcome.start_processing_time,
                outcome.start_processing_time + task.processing_time,
                idx,
            ));
            total_e2e += outcome.e2e_latency;
            total_waiting += outcome.waiting_time;
        } else {
            dropped += 1;
        }
    }
    if assigned + dropped != n
        || assigned != metrics.assigned_count
        || dropped != metrics.dropped_count
    {
        return fail("assigned/dropped counts do not partition the task set".into());
    }
    if n > 0 && !close(metrics.drop_ratio, dropped as f64 / n as f64) {
        return fail("drop ratio does not match the dropped count".into());
    }
    if !close(metrics.total_e2e, total_e2e) || !close(metrics.total_waiting, total_waiting) {
        return fail("latency totals do not match the outcomes".into());
    }
    if assigned > 0 {
        if !close(metrics.avg_e2e * assigned as f64, metrics.total_e2e) {
            return fail("avg_e2e times assigned count differs from total_e2e".into());
        }
        if !close(metrics.avg_waiting * assigned as f64, metrics.total_waiting) {
            return fail("avg_waiting times assigned count differs from total_waiting".into());
        }
    }
    let recomputed_objective = model::objective_value(
        &metrics.per_task_outcomes,
        ObjectiveWeights {
            lambda: metrics.lambda,
        },
    );
    if !close(metrics.objective, recomputed_objective) {
        return fail("objective does not recompute from the outcomes".into());
    }
    for (server, mut intervals) in per_server {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in intervals.windows(2) {
            if pair[1].0 < pair[0].1 - 1e-12 {
                return fail(format!(
                    "server {server}: tasks {} and {} overlap",
                    pair[0].2, pair[1].2
                ));
            }
        }
    }
    let mut last_span_end = f64::NEG_INFINITY;
    for record in &metrics.windows_log {
        if record.span_end < last_span_end - 1e-12 {
            return fail(format!(
                "window {} regresses the decision clock",
                record.window_index
            ));
        }
        last_span_end = record.span_end;
    }
    Ok(())
}
