//! Deterministic simulator of deadline-constrained task offloading from
//! highway vehicles to roadside MEC servers, with a pluggable scheduler
//! library: greedy baselines, a cost-driven assignment heuristic, and
//! random-key particle-swarm regimes.

pub mod engine;
pub mod error;
pub mod model;
pub mod pso;
pub mod sched;
pub mod workload;

pub use engine::{
    run, verify_consistency, EngineConfig, ExecTimeMode, RunMetrics, SchedulerKind, WindowRecord,
};
pub use error::{Error, Result};
pub use model::{
    ChannelParams, MecState, ObjectiveWeights, ServerId, Task, TaskId, TaskOutcome,
};
pub use pso::{ConvergenceTrace, PsoParams};
pub use sched::{DecisionWindow, SchedulerDecision};
pub use workload::{generate_scenario, Scenario, WorkloadConfig};
