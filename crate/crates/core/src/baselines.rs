//! Reference schedulers: Greedy, HSF, EDF and LSF.
//!
//! All four operate on the same task/candidate/station inputs as the
//! composite-priority scheduler and produce plans that satisfy the same
//! four constraints; they differ only in how tasks and devices are ordered.

use crate::error::{Error, Result};
use crate::scheduler::{
    fill_in_order, Assignment, AssignmentPlan, BaseStation, CandidateMap, Task,
};
use crate::types::{DeviceId, Slot, StationId, TaskId};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

/// Scheduling algorithms selectable at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Mpbs,
    Greedy,
    Hsf,
    Edf,
    Lsf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Mpbs,
        Algorithm::Greedy,
        Algorithm::Hsf,
        Algorithm::Edf,
        Algorithm::Lsf,
    ];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Mpbs => "mpbs",
            Algorithm::Greedy => "greedy",
            Algorithm::Hsf => "hsf",
            Algorithm::Edf => "edf",
            Algorithm::Lsf => "lsf",
        };
        f.write_str(s)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpbs" => Ok(Algorithm::Mpbs),
            "greedy" => Ok(Algorithm::Greedy),
            "hsf" => Ok(Algorithm::Hsf),
            "edf" => Ok(Algorithm::Edf),
            "lsf" => Ok(Algorithm::Lsf),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm '{other}', expected one of: mpbs, greedy, hsf, edf, lsf"
            ))),
        }
    }
}

/// Earliest-deadline-first service order; ties by lower task id.
pub fn edf_task_order(tasks: &[Task]) -> Vec<TaskId> {
    let mut order: Vec<&Task> = tasks.iter().collect();
    order.sort_by(|a, b| a.deadline.cmp(&b.deadline).then(a.id.cmp(&b.id)));
    order.into_iter().map(|t| t.id).collect()
}

/// Least-slack-first service order with a uniform service-time estimate;
/// slack is `deadline - now - service_estimate` and may go negative.
pub fn lsf_task_order(tasks: &[Task], now: Slot, service_estimate: u32) -> Vec<TaskId> {
    let mut order: Vec<&Task> = tasks.iter().collect();
    order.sort_by(|a, b| {
        let slack_a = a.deadline as i64 - now as i64 - service_estimate as i64;
        let slack_b = b.deadline as i64 - now as i64 - service_estimate as i64;
        slack_a.cmp(&slack_b).then(a.id.cmp(&b.id))
    });
    order.into_iter().map(|t| t.id).collect()
}

/// Deadline-ordered scheduling with the shared greedy fill loop.
pub fn schedule_edf(
    tasks: &[Task],
    candidates: &CandidateMap,
    stations: &[BaseStation],
    _now: Slot,
) -> AssignmentPlan {
    fill_in_order(&edf_task_order(tasks), tasks, candidates, stations)
}

/// Slack-ordered scheduling; `service_estimate` is in slots (tasks here
/// complete within their assigned slot, so the default is 1).
pub fn schedule_lsf(
    tasks: &[Task],
    candidates: &CandidateMap,
    stations: &[BaseStation],
    now: Slot,
    service_estimate: u32,
) -> AssignmentPlan {
    fill_in_order(
        &lsf_task_order(tasks, now, service_estimate),
        tasks,
        candidates,
        stations,
    )
}

/// Pick the single (task, device) pair with the highest marginal gain --
/// the device's predicted probability at the task location -- until no
/// feasible pair remains. Gains are static, so one descending sweep over all
/// pairs is equivalent to repeated argmax.
pub fn schedule_greedy(
    tasks: &[Task],
    candidates: &CandidateMap,
    stations: &[BaseStation],
    _now: Slot,
) -> AssignmentPlan {
    let by_id: BTreeMap<TaskId, &Task> = tasks.iter().map(|t| (t.id, t)).collect();
    let capacity: BTreeMap<StationId, u32> = stations.iter().map(|s| (s.id, s.capacity)).collect();

    let mut pairs: Vec<(f64, TaskId, DeviceId)> = Vec::new();
    for (task_id, list) in candidates {
        if !by_id.contains_key(task_id) {
            continue;
        }
        for c in list {
            pairs.push((c.probability, *task_id, c.device));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut filled: BTreeMap<TaskId, u32> = BTreeMap::new();
    let mut station_used: BTreeMap<StationId, u32> = BTreeMap::new();
    let mut taken: BTreeSet<DeviceId> = BTreeSet::new();
    let mut plan = AssignmentPlan::default();
    for (_, task_id, device) in pairs {
        let task = by_id[&task_id];
        if filled.get(&task_id).copied().unwrap_or(0) >= task.required {
            continue;
        }
        if taken.contains(&device) {
            continue;
        }
        let cap = capacity.get(&task.home_station).copied().unwrap_or(0);
        if station_used.get(&task.home_station).copied().unwrap_or(0) >= cap {
            continue;
        }
        taken.insert(device);
        *filled.entry(task_id).or_insert(0) += 1;
        *station_used.entry(task.home_station).or_insert(0) += 1;
        plan.assignments.push(Assignment {
            task: task_id,
            device,
            station: task.home_station,
        });
    }
    plan
}

/// Heuristic score filtering: devices are scored by their summed predicted
/// probability over the unfilled tasks they are candidates for, divided by
/// their cost. The best-scoring device is assigned to its best remaining
/// task, scores are re-evaluated, and devices whose score drops below
/// `min_gain` are filtered out.
pub fn schedule_hsf(
    tasks: &[Task],
    candidates: &CandidateMap,
    stations: &[BaseStation],
    _now: Slot,
    cost: &BTreeMap<DeviceId, f64>,
    min_gain: f64,
) -> Result<AssignmentPlan> {
    if cost.values().any(|&c| c <= 0.0) {
        return Err(Error::InvalidConfig(
            "hsf device costs must be positive".into(),
        ));
    }
    let by_id: BTreeMap<TaskId, &Task> = tasks.iter().map(|t| (t.id, t)).collect();
    let capacity: BTreeMap<StationId, u32> = stations.iter().map(|s| (s.id, s.capacity)).collect();

    // device -> [(task, probability)] eligibility index.
    let mut options: BTreeMap<DeviceId, Vec<(TaskId, f64)>> = BTreeMap::new();
    for (task_id, list) in candidates {
        if !by_id.contains_key(task_id) {
            continue;
        }
        for c in list {
            options
                .entry(c.device)
                .or_default()
                .push((*task_id, c.probability));
        }
    }

    let mut filled: BTreeMap<TaskId, u32> = BTreeMap::new();
    let mut station_used: BTreeMap<StationId, u32> = BTreeMap::new();
    let mut pool: BTreeSet<DeviceId> = options.keys().copied().collect();
    let mut plan = AssignmentPlan::default();

    loop {
        let feasible_task = |task_id: &TaskId| -> bool {
            let task = by_id[task_id];
            filled.get(task_id).copied().unwrap_or(0) < task.required
                && station_used.get(&task.home_station).copied().unwrap_or(0)
                    < capacity.get(&task.home_station).copied().unwrap_or(0)
        };

        // Score every pooled device over tasks still worth serving.
        let mut best: Option<(f64, DeviceId)> = None;
        let mut dropped: Vec<DeviceId> = Vec::new();
        for &device in &pool {
            let gain: f64 = options[&device]
                .iter()
                .filter(|(t, _)| feasible_task(t))
                .map(|(_, p)| p)
                .sum();
            let score = gain / cost.get(&device).copied().unwrap_or(1.0);
            if score < min_gain || gain == 0.0 {
                dropped.push(device);
                continue;
            }
            let better = match best {
                None => true,
                Some((s, d)) => score > s || (score == s && device < d),
            };
            if better {
                best = Some((score, device));
            }
        }
        for d in dropped {
            pool.remove(&d);
        }
        let (_, device) = match best {
            Some(b) => b,
            None => break,
        };

        // Assign the winner to its best remaining task.
        let target = options[&device]
            .iter()
            .filter(|(t, _)| feasible_task(t))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(t, _)| *t)
            .expect("winner had positive gain");
        let task = by_id[&target];
        pool.remove(&device);
        *filled.entry(target).or_insert(0) += 1;
        *station_used.entry(task.home_station).or_insert(0) += 1;
        plan.assignments.push(Assignment {
            task: target,
            device,
            station: task.home_station,
        });
    }
    Ok(plan)
}
