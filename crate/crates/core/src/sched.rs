//! Scheduler decisions over a window of arrived, deadline-feasible tasks:
//! first-come-first-served, shortest-deadline-first, and the cost-driven
//! assignment heuristic that scores each candidate by the queueing damage
//! it inflicts on the rest of the window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{max_waiting_time, ServerId, Task, TaskId};

/// The set of tasks eligible for the next server slot, plus the arrived
/// tasks that were ruled out because they can no longer meet their
/// deadlines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionWindow {
    pub window_index: usize,
    /// Start-processing time of the most recently assigned task.
    pub span_start: f64,
    /// The availability instant this window was built for.
    pub span_end: f64,
    pub eligible: Vec<Task>,
    pub excluded_infeasible: Vec<TaskId>,
}

impl DecisionWindow {
    pub fn is_empty(&self) -> bool {
        self.eligible.is_empty()
    }
}

/// The pick for one window, with the full per-candidate score map kept for
/// auditing. `chosen_task_id` always attains the minimum of
/// `per_candidate_costs`; ties resolve to earliest arrival, then lowest id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerDecision {
    pub chosen_task_id: TaskId,
    pub target_server: ServerId,
    pub decision_cost: f64,
    pub per_candidate_costs: BTreeMap<TaskId, f64>,
}

/// Whether assigning a task with processing time `selected_processing`
/// ahead of an affected task that has already waited `affected_waiting`
/// pushes the affected task past its waiting budget. The boundary counts
/// as surviving.
pub fn drop_condition(
    selected_processing: f64,
    affected_waiting: f64,
    affected_w_max: f64,
) -> bool {
    selected_processing + affected_waiting > affected_w_max
}

/// Cost of picking `selected` next, accumulated over every other eligible
/// task: a task that would be dropped contributes 1, a survivor contributes
/// the fraction of its waiting budget that the pick consumes. A window of
/// one has cost zero.
pub fn cda_cost(selected: &Task, window: &DecisionWindow, t_e_av: f64) -> f64 {
    let mut cost = 0.0;
    for affected in &window.eligible {
        if affected.id == selected.id {
            continue;
        }
        let waiting = (t_e_av - affected.arrival_time).max(0.0);
        let w_max = max_waiting_time(affected);
        // Non-positive budget means the affected task is already beyond
        // saving; charge the drop penalty instead of dividing by it.
        if w_max <= 0.0 || drop_condition(selected.processing_time, waiting, w_max) {
            cost += 1.0;
        } else {
            cost += (selected.processing_time + waiting) / w_max;
        }
    }
    cost
}

fn decide_by_cost<F>(
    window: &DecisionWindow,
    target_server: ServerId,
    cost_of: F,
) -> Option<SchedulerDecision>
where
    F: Fn(&Task) -> f64,
{
    let mut per_candidate_costs = BTreeMap::new();
    let mut best: Option<&Task> = None;
    let mut best_cost = f64::INFINITY;
    for task in &window.eligible {
        let cost = cost_of(task);
        per_candidate_costs.insert(task.id, cost);
        let better = match best {
            None => true,
            Some(current) => {
                match cost.total_cmp(&best_cost) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => {
                        match task.arrival_time.total_cmp(&current.arrival_time) {
                            std::cmp::Ordering::Less => true,
                            std::cmp::Ordering::Greater => false,
                            std::cmp::Ordering::Equal => task.id < current.id,
                        }
                    }
                }
            }
        };
        if better {
            best = Some(task);
            best_cost = cost;
        }
    }
    best.map(|task| SchedulerDecision {
        chosen_task_id: task.id,
        target_server,
        decision_cost: best_cost,
        per_candidate_costs,
    })
}

/// Picks the eligible task that arrived first; the audit map records each
/// candidate's arrival time. Returns `None` on an empty window.
pub fn schedule_fcfs(window: &DecisionWindow, target_server: ServerId) -> Option<SchedulerDecision> {
    decide_by_cost(window, target_server, |t| t.arrival_time)
}

/// Picks the eligible task with the earliest absolute deadline; the audit
/// map records each candidate's deadline.
pub fn schedule_sdf(window: &DecisionWindow, target_server: ServerId) -> Option<SchedulerDecision> {
    decide_by_cost(window, target_server, |t| t.deadline)
}

/// Evaluates the cost heuristic for every eligible task and returns the
/// argmin with the full cost map.
pub fn schedule_cda(
    window: &DecisionWindow,
    t_e_av: f64,
    target_server: ServerId,
) -> Option<SchedulerDecision> {
    decide_by_cost(window, target_server, |t| cda_cost(t, window, t_e_av))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn task(id: TaskId, arrival: f64, processing: f64, deadline: f64) -> Task {
        Task {
            id,
            size_bits: 1000.0,
            result_size_bits: 1000.0,
            arrival_time: arrival,
            processing_time: processing,
            deadline,
            range_window: (deadline - arrival).max(0.1) + 5.0,
            offload_ready_time: arrival,
        }
    }

    fn window(eligible: Vec<Task>, span_end: f64) -> DecisionWindow {
        DecisionWindow {
            window_index: 0,
            span_start: 0.0,
            span_end,
            eligible,
            excluded_infeasible: vec![],
        }
    }

    /// Straight-line reimplementation of the candidate cost used to
    /// cross-check `schedule_cda` without sharing any code with it.
    fn brute_cda_choice(eligible: &[Task], t_e_av: f64) -> (TaskId, f64) {
        let mut best_id = usize::MAX;
        let mut best = (f64::INFINITY, f64::INFINITY, usize::MAX);
        for s in eligible {
            let mut cost = 0.0;
            for a in eligible {
                if a.id == s.id {
                    continue;
                }
                let wait = if t_e_av > a.arrival_time {
                    t_e_av - a.arrival_time
                } else {
                    0.0
                };
                let w_max = a.deadline - a.processing_time - a.arrival_time;
                if w_max <= 0.0 || s.processing_time + wait > w_max {
                    cost += 1.0;
                } else {
                    cost += (s.processing_time + wait) / w_max;
                }
            }
            let key = (cost, s.arrival_time, s.id);
            if key.0 < best.0
                || (key.0 == best.0 && key.1 < best.1)
                || (key.0 == best.0 && key.1 == best.1 && key.2 < best.2)
            {
                best = key;
                best_id = s.id;
            }
        }
        (best_id, best.0)
    }

    #[test]
    fn fcfs_picks_min_arrival() {
        let w = window(
            vec![task(0, 3.0, 1.0, 20.0), task(1, 1.0, 1.0, 20.0), task(2, 2.0, 1.0, 20.0)],
            5.0,
        );
        let d = schedule_fcfs(&w, 0).unwrap();
        assert_eq!(d.chosen_task_id, 1);
        assert_relative_eq!(d.decision_cost, 1.0);
    }

    #[test]
    fn fcfs_singleton_and_tie() {
        let w = window(vec![task(7, 4.0, 1.0, 20.0)], 5.0);
        assert_eq!(schedule_fcfs(&w, 1).unwrap().chosen_task_id, 7);

        let w = window(vec![task(3, 2.0, 1.0, 20.0), task(1, 2.0, 1.0, 20.0)], 5.0);
        assert_eq!(schedule_fcfs(&w, 0).unwrap().chosen_task_id, 1);
    }

    #[test]
    fn fcfs_empty_window_no_decision() {
        let w = window(vec![], 5.0);
        assert!(schedule_fcfs(&w, 0).is_none());
        assert!(schedule_sdf(&w, 0).is_none());
        assert!(schedule_cda(&w, 5.0, 0).is_none());
    }

    #[test]
    fn sdf_picks_min_deadline_with_tie_breaks() {
        let w = window(
            vec![task(0, 1.0, 1.0, 12.0), task(1, 2.0, 1.0, 9.0), task(2, 3.0, 1.0, 15.0)],
            5.0,
        );
        assert_eq!(schedule_sdf(&w, 0).unwrap().chosen_task_id, 1);

        let w = window(vec![task(0, 2.0, 1.0, 9.0), task(1, 1.0, 1.0, 9.0)], 5.0);
        assert_eq!(schedule_sdf(&w, 0).unwrap().chosen_task_id, 1);
    }

    #[test]
    fn fcfs_and_sdf_agree_when_earliest_arrival_has_shortest_deadline() {
        let w = window(vec![task(0, 1.0, 1.0, 8.0), task(1, 2.0, 1.0, 14.0)], 5.0);
        assert_eq!(
            schedule_fcfs(&w, 0).unwrap().chosen_task_id,
            schedule_sdf(&w, 0).unwrap().chosen_task_id
        );
    }

    #[test]
    fn drop_condition_boundary() {
        assert!(!drop_condition(2.0, 3.0, 5.0));
        assert!(drop_condition(2.0, 3.0001, 5.0));
        assert!(drop_condition(1.0, 0.0, -0.5));
    }

    #[test]
    fn cda_cost_singleton_window_is_zero() {
        let t = task(0, 1.0, 2.0, 30.0);
        let w = window(vec![t], 5.0);
        assert_relative_eq!(cda_cost(&t, &w, 5.0), 0.0);
    }

    #[test]
    fn cda_cost_three_surviving_tasks_sums_two_ratios() {
        // t_e_av = 10: the affected tasks have waited (10 - arrival).
        let a = task(0, 2.0, 2.0, 40.0);
        let b = task(1, 4.0, 3.0, 50.0);
        let c = task(2, 6.0, 1.0, 60.0);
        let w = window(vec![a, b, c], 10.0);

        // Picking a: affected are b (wait 6, w_max 43) and c (wait 4, w_max 53).
        let expected = (2.0 + 6.0) / 43.0 + (2.0 + 4.0) / 53.0;
        let got = cda_cost(&a, &w, 10.0);
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        assert!(got > 0.0 && got < 2.0);
    }

    #[test]
    fn cda_argmin_avoids_the_task_that_drops_both_others() {
        // The long task wipes out both tight tasks (cost 2.0); either tight
        // task keeps the other alive. Exhaustive scores over the window
        // confirm the argmin steers away from the long task.
        let long = task(0, 0.0, 10.0, 60.0);
        let tight1 = task(1, 1.0, 1.0, 8.0);
        let tight2 = task(2, 1.5, 1.0, 9.0);
        let w = window(vec![long, tight1, tight2], 2.0);

        let cost_long = cda_cost(&long, &w, 2.0);
        assert_relative_eq!(cost_long, 2.0);
        let cost_t1 = cda_cost(&tight1, &w, 2.0);
        let cost_t2 = cda_cost(&tight2, &w, 2.0);
        assert!(cost_t1 < 2.0 && cost_t2 < 2.0);

        let d = schedule_cda(&w, 2.0, 0).unwrap();
        assert_ne!(d.chosen_task_id, 0);
        let (brute_id, brute_cost) = brute_cda_choice(&w.eligible, 2.0);
        assert_eq!(d.chosen_task_id, brute_id);
        assert_relative_eq!(d.decision_cost, brute_cost, max_relative = 1e-12);
    }

    #[test]
    fn cda_singleton_window_costs_zero() {
        let w = window(vec![task(4, 1.0, 2.0, 30.0)], 5.0);
        let d = schedule_cda(&w, 5.0, 1).unwrap();
        assert_eq!(d.chosen_task_id, 4);
        assert_relative_eq!(d.decision_cost, 0.0);
        assert_eq!(d.target_server, 1);
    }

    #[test]
    fn identical_tasks_tie_break_to_lowest_id() {
        let w = window(
            vec![task(2, 1.0, 2.0, 40.0), task(0, 1.0, 2.0, 40.0), task(1, 1.0, 2.0, 40.0)],
            3.0,
        );
        let d = schedule_cda(&w, 3.0, 0).unwrap();
        // All candidate costs are equal, so the choice falls to the id.
        let costs: Vec<f64> = d.per_candidate_costs.values().copied().collect();
        assert!(costs.windows(2).all(|p| (p[0] - p[1]).abs() < 1e-12));
        assert_eq!(d.chosen_task_id, 0);
    }

    proptest! {
        #[test]
        fn cda_choice_matches_independent_scorer(
            n in 1usize..8,
            seed_arrivals in proptest::collection::vec(0.0..10.0f64, 8),
            seed_proc in proptest::collection::vec(0.5..4.0f64, 8),
            seed_slack in proptest::collection::vec(-2.0..30.0f64, 8),
            t_e_av in 5.0..20.0f64,
        ) {
            let eligible: Vec<Task> = (0..n)
                .map(|i| {
                    let arrival = seed_arrivals[i];
                    let deadline = arrival + seed_proc[i] + seed_slack[i];
                    task(i, arrival, seed_proc[i], deadline)
                })
                .collect();
            let w = window(eligible.clone(), t_e_av);
            let d = schedule_cda(&w, t_e_av, 0).unwrap();
            let (brute_id, brute_cost) = brute_cda_choice(&eligible, t_e_av);
            prop_assert_eq!(d.chosen_task_id, brute_id);
            prop_assert!((d.decision_cost - brute_cost).abs() < 1e-9);
        }

        #[test]
        fn cda_cost_bounded_by_window_size(
            n in 2usize..8,
            arrivals in proptest::collection::vec(0.0..10.0f64, 8),
            procs in proptest::collection::vec(0.5..4.0f64, 8),
            slacks in proptest::collection::vec(-2.0..30.0f64, 8),
        ) {
            let eligible: Vec<Task> = (0..n)
                .map(|i| task(i, arrivals[i], procs[i], arrivals[i] + procs[i] + slacks[i]))
                .collect();
            let w = window(eligible.clone(), 12.0);
            for t in &eligible {
                let c = cda_cost(t, &w, 12.0);
                prop_assert!(c >= 0.0);
                prop_assert!(c <= (n - 1) as f64 + 1e-12);
            }
        }

        #[test]
        fn cda_costs_are_time_shift_invariant(
            n in 2usize..7,
            arrivals in proptest::collection::vec(0.0..10.0f64, 8),
            procs in proptest::collection::vec(0.5..4.0f64, 8),
            slacks in proptest::collection::vec(0.0..30.0f64, 8),
            shift in 0.0..100.0f64,
        ) {
            let base: Vec<Task> = (0..n)
                .map(|i| task(i, arrivals[i], procs[i], arrivals[i] + procs[i] + slacks[i]))
                .collect();
            let shifted: Vec<Task> = base
                .iter()
                .map(|t| {
                    let mut s = *t;
                    s.arrival_time += shift;
                    s.deadline += shift;
                    s.offload_ready_time += shift;
                    s
                })
                .collect();
            let w0 = window(base, 12.0);
            let w1 = window(shifted, 12.0 + shift);
            let d0 = schedule_cda(&w0, 12.0, 0).unwrap();
            let d1 = schedule_cda(&w1, 12.0 + shift, 0).unwrap();
            prop_assert_eq!(d0.chosen_task_id, d1.chosen_task_id);
            for (id, c0) in &d0.per_candidate_costs {
                let c1 = d1.per_candidate_costs[id];
                prop_assert!((c0 - c1).abs() < 1e-9);
            }
        }

        #[test]
        fn fcfs_and_sdf_ignore_input_order(
            n in 1usize..8,
            arrivals in proptest::collection::vec(0.0..10.0f64, 8),
            deadlines in proptest::collection::vec(10.0..40.0f64, 8),
            rotation in 0usize..8,
        ) {
            let tasks: Vec<Task> = (0..n)
                .map(|i| task(i, arrivals[i], 1.0, deadlines[i]))
                .collect();
            let mut rotated = tasks.clone();
            rotated.rotate_left(rotation % n.max(1));

            let w0 = window(tasks, 5.0);
            let w1 = window(rotated, 5.0);
            prop_assert_eq!(
                schedule_fcfs(&w0, 0).unwrap().chosen_task_id,
                schedule_fcfs(&w1, 0).unwrap().chosen_task_id
            );
            prop_assert_eq!(
                schedule_sdf(&w0, 0).unwrap().chosen_task_id,
                schedule_sdf(&w1, 0).unwrap().chosen_task_id
            );
        }
    }
}
