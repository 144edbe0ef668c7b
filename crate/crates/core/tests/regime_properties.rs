//! Cross-regime behavior at desk scale: the hindsight optimizer bounds the
//! online regimes, the delayed-static regime pays for waiting, and the
//! per-window swarm agrees with exhaustive window search when windows are
//! small enough to enumerate.

use vecsim_core::engine::{
    run, score_order, verify_consistency, EngineConfig, ExecTimeMode, RunMetrics, SchedulerKind,
    SliceContext,
};
use vecsim_core::model::{ChannelParams, MecState, ObjectiveWeights, Task};
use vecsim_core::pso::PsoParams;
use vecsim_core::workload::{generate_scenario, uplink_times, Scenario, WorkloadConfig};

fn small_config(num_vehicles: usize, seed: u64) -> WorkloadConfig {
    WorkloadConfig {
        num_vehicles,
        arrival_rate: 1.4,
        coverage_radius: 250.0,
        rsu_position: 450.0,
        approach_span: 150.0,
        seed,
        ..WorkloadConfig::default()
    }
}

fn cfg(kind: SchedulerKind, exec: ExecTimeMode) -> EngineConfig {
    EngineConfig {
        exec_time_mode: exec,
        ..EngineConfig::new(kind)
    }
}

fn run_fixed(scenario: &Scenario, kind: SchedulerKind, params: &PsoParams) -> RunMetrics {
    let metrics = run(scenario, &cfg(kind, ExecTimeMode::Fixed(0.0)), Some(params)).unwrap();
    verify_consistency(scenario, &metrics).unwrap();
    metrics
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            rec(items, k - 1, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    rec(&mut items, n, &mut out);
    out
}

#[test]
fn hindsight_regime_bounds_the_others_on_small_scenarios() {
    let params = PsoParams::default();
    let mut objective_wins = 0;
    let mut drop_wins = 0;
    let seeds = 10u64;
    for seed in 0..seeds {
        let scenario = generate_scenario(&small_config(5, seed + 100)).unwrap();
        let off = run_fixed(&scenario, SchedulerKind::OffStaPso, &params);
        let others = [
            run_fixed(&scenario, SchedulerKind::Fcfs, &params),
            run_fixed(&scenario, SchedulerKind::Sdf, &params),
            run_fixed(&scenario, SchedulerKind::Cda, &params),
            run_fixed(&scenario, SchedulerKind::OnStaPso, &params),
            run_fixed(&scenario, SchedulerKind::OnDynPso, &params),
        ];
        if others.iter().all(|m| off.objective <= m.objective + 1e-9) {
            objective_wins += 1;
        }
        let on_sta = run_fixed(&scenario, SchedulerKind::OnStaPso, &params);
        if off.dropped_count <= on_sta.dropped_count {
            drop_wins += 1;
        }
    }
    assert!(objective_wins >= 9, "hindsight bound held on {objective_wins}/{seeds} seeds");
    assert!(drop_wins >= 9, "drop bound held on {drop_wins}/{seeds} seeds");
}

#[test]
fn delayed_static_regime_starts_after_the_last_arrival() {
    let exec = 0.25;
    for seed in [5u64, 6, 7] {
        let scenario = generate_scenario(&small_config(8, seed)).unwrap();
        let metrics = run(
            &scenario,
            &cfg(SchedulerKind::OnStaPso, ExecTimeMode::Fixed(exec)),
            Some(&PsoParams::default()),
        )
        .unwrap();
        let last_arrival = scenario
            .tasks
            .iter()
            .map(|t| t.arrival_time)
            .fold(f64::NEG_INFINITY, f64::max);
        for outcome in metrics.per_task_outcomes.iter().filter(|o| o.is_assigned()) {
            assert!(
                outcome.start_processing_time >= last_arrival + exec - 1e-9,
                "start {} before {last_arrival} + {exec}",
                outcome.start_processing_time
            );
        }
    }
}

#[test]
fn delayed_static_regime_waits_at_least_as_long_as_hindsight() {
    let params = PsoParams::default();
    let mut holds = 0;
    for seed in 0..10u64 {
        let scenario = generate_scenario(&small_config(6, seed + 40)).unwrap();
        let off = run_fixed(&scenario, SchedulerKind::OffStaPso, &params);
        let on = run_fixed(&scenario, SchedulerKind::OnStaPso, &params);
        if on.avg_waiting >= off.avg_waiting - 1e-9 {
            holds += 1;
        }
    }
    assert!(holds >= 9, "waiting bound held on {holds}/10 seeds");
}

#[test]
fn single_task_delayed_regime_degenerates_to_hindsight() {
    let task = Task {
        id: 0,
        size_bits: 2_160_000.0,
        result_size_bits: 2_160_000.0,
        arrival_time: 2.0,
        processing_time: 1.0,
        deadline: 32.0,
        range_window: 30.0,
        offload_ready_time: 2.0,
    };
    let scenario = Scenario {
        tasks: vec![task],
        channel: ChannelParams::default(),
        num_servers: 2,
        config_echo: WorkloadConfig::default(),
    };
    let params = PsoParams::default();
    let off = run_fixed(&scenario, SchedulerKind::OffStaPso, &params);
    let on = run_fixed(&scenario, SchedulerKind::OnStaPso, &params);
    assert_eq!(off.per_task_outcomes, on.per_task_outcomes);
    assert!((off.objective - on.objective).abs() < 1e-12);
}

#[test]
fn window_swarm_skips_windows_when_bootstrap_covers_everything() {
    let scenario = generate_scenario(&small_config(2, 77)).unwrap();
    let metrics = run_fixed(&scenario, SchedulerKind::OnDynPso, &PsoParams::default());
    assert!(metrics.windows_log.is_empty());
    assert_eq!(metrics.dropped_count, 0);
}

#[test]
fn window_swarm_singleton_window_is_seed_independent() {
    // Two bootstrap tasks plus one later arrival: the only window holds
    // exactly that task, so every seed must pick it.
    let mk = |id, arrival: f64| Task {
        id,
        size_bits: 2_160_000.0,
        result_size_bits: 2_160_000.0,
        arrival_time: arrival,
        processing_time: 1.5,
        deadline: arrival + 40.0,
        range_window: 40.0,
        offload_ready_time: arrival,
    };
    let scenario = Scenario {
        tasks: vec![mk(0, 0.0), mk(1, 0.2), mk(2, 0.4)],
        channel: ChannelParams::default(),
        num_servers: 2,
        config_echo: WorkloadConfig::default(),
    };
    for seed in [1u64, 99, 4096] {
        let params = PsoParams {
            seed,
            ..PsoParams::default()
        };
        let metrics = run_fixed(&scenario, SchedulerKind::OnDynPso, &params);
        assert_eq!(metrics.windows_log.len(), 1);
        let decision = metrics.windows_log[0].decision.as_ref().unwrap();
        assert_eq!(decision.chosen_task_id, 2);
        assert_eq!(metrics.dropped_count, 0);
    }
}

/// Replays a dynamic-swarm run window by window, enumerating every order
/// of each (small) window from the reconstructed server state; the
/// engine's pick must match the exhaustive argmin head.
#[test]
fn window_swarm_choice_matches_exhaustive_window_search() {
    let scenario = generate_scenario(&small_config(6, 11)).unwrap();
    let params = PsoParams::default();
    let metrics = run_fixed(&scenario, SchedulerKind::OnDynPso, &params);

    let uplink = uplink_times(&scenario.tasks, &scenario.channel).unwrap();
    let weights = ObjectiveWeights::default();

    // Server state right after the bootstrap: tasks resolved before the
    // first window are exactly the ones that never appear in any window.
    let mut in_windows = vec![false; scenario.tasks.len()];
    for record in &metrics.windows_log {
        for &id in record.eligible.iter().chain(&record.excluded_infeasible) {
            in_windows[id] = true;
        }
    }
    let mut servers: Vec<MecState> = (0..scenario.num_servers).map(MecState::new).collect();
    let mut seeded = 0;
    for task in &scenario.tasks {
        if in_windows[task.id] {
            continue;
        }
        let outcome = &metrics.per_task_outcomes[task.id];
        if outcome.is_assigned() {
            servers[seeded]
                .push_assignment(
                    task.id,
                    outcome.start_processing_time,
                    outcome.start_processing_time + task.processing_time,
                )
                .unwrap();
            seeded += 1;
        }
    }

    let mut completions: Vec<(f64, f64)> = metrics
        .per_task_outcomes
        .iter()
        .filter(|o| o.is_assigned() && !in_windows[o.task_id])
        .map(|o| {
            (
                o.start_processing_time + scenario.tasks[o.task_id].processing_time,
                scenario.tasks[o.task_id].result_size_bits,
            )
        })
        .collect();

    for record in &metrics.windows_log {
        let Some(decision) = &record.decision else { continue };
        let eligible: Vec<Task> = record
            .eligible
            .iter()
            .map(|&id| scenario.tasks[id])
            .collect();
        assert!(eligible.len() <= 6, "scenario produced an oversized window");

        let up_slice: Vec<f64> = record.eligible.iter().map(|&id| uplink[id]).collect();
        let init: Vec<f64> = servers.iter().map(|s| s.available_at).collect();
        let ctx = SliceContext {
            tasks: &eligible,
            uplink: &up_slice,
            channel: &scenario.channel,
            weights,
            init_available: &init,
            prior_completions: &completions,
        };

        let mut best = f64::INFINITY;
        let mut best_head = usize::MAX;
        for order in permutations(eligible.len()) {
            let fit = score_order(&order, &ctx, 0.0).unwrap().objective;
            if fit < best - 1e-12 {
                best = fit;
                best_head = order[0];
            }
        }
        assert_eq!(
            decision.chosen_task_id, eligible[best_head].id,
            "window {}",
            record.window_index
        );
        assert!((decision.decision_cost - best).abs() < 1e-9);

        // Advance the reconstructed state past this window's assignment.
        let outcome = &metrics.per_task_outcomes[decision.chosen_task_id];
        if outcome.is_assigned() {
            let p = scenario.tasks[decision.chosen_task_id].processing_time;
            servers[outcome.assigned_mec.unwrap()]
                .push_assignment(
                    decision.chosen_task_id,
                    outcome.start_processing_time,
                    outcome.start_processing_time + p,
                )
                .unwrap();
            completions.push((
                outcome.start_processing_time + p,
                scenario.tasks[decision.chosen_task_id].result_size_bits,
            ));
        }
    }
}

/// With zero execution-time charge the cost-driven run can never beat the
/// exhaustive order optimum, and it should rarely lose to first-come
/// ordering.
#[test]
fn cda_sits_between_exhaustive_optimum_and_fcfs() {
    let weights = ObjectiveWeights::default();
    let mut holds = 0;
    let total = 50;
    for seed in 0..total {
        let n = 4 + (seed as usize % 4);
        let scenario = generate_scenario(&small_config(n, 1000 + seed)).unwrap();
        let uplink = uplink_times(&scenario.tasks, &scenario.channel).unwrap();
        let init = vec![0.0; scenario.num_servers];
        let ctx = SliceContext {
            tasks: &scenario.tasks,
            uplink: &uplink,
            channel: &scenario.channel,
            weights,
            init_available: &init,
            prior_completions: &[],
        };
        let mut optimum = f64::INFINITY;
        for order in permutations(scenario.tasks.len()) {
            optimum = optimum.min(score_order(&order, &ctx, 0.0).unwrap().objective);
        }
        let cda = run(
            &scenario,
            &cfg(SchedulerKind::Cda, ExecTimeMode::Fixed(0.0)),
            None,
        )
        .unwrap();
        let fcfs = run(
            &scenario,
            &cfg(SchedulerKind::Fcfs, ExecTimeMode::Fixed(0.0)),
            None,
        )
        .unwrap();
        if cda.objective >= optimum - 1e-9 && cda.objective <= fcfs.objective + 1e-9 {
            holds += 1;
        }
    }
    assert!(
        holds * 10 >= total * 9,
        "CDA bracket held on {holds}/{total} scenarios"
    );
}
