//! Composite-priority task scheduling and independent plan validation.
//!
//! Pending tasks are ranked by `P_i = alpha * u_i + beta * m_j`, where `u_i`
//! is the task's urgency (min-max normalized within the batch so it shares
//! the unit scale of the station score) and `m_j` the reliability of its
//! home station. Devices are then assigned greedily in candidate order until
//! requirements or capacities bind.

use crate::error::{Error, Result};
use crate::grid::RegionId;
use crate::recruitment::DeviceForecast;
use crate::types::{DeviceId, Slot, StationId, TaskId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

/// One sensing task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    /// Region the task must be served in.
    pub location: RegionId,
    /// Devices required, >= 1.
    pub required: u32,
    pub release: Slot,
    pub deadline: Slot,
    pub home_station: StationId,
}

/// Rolling performance statistics of one base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationStats {
    /// Completed over attempted recruitments, in [0, 1].
    pub success_rate: f64,
    /// Mean slots between task release and recruitment.
    pub avg_response_delay: f64,
    /// Fraction of recent slots in which the station dispatched, in [0, 1].
    pub utilization_rate: f64,
}

/// A base station with coverage, capacity and its recruitment factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: StationId,
    pub coverage: BTreeSet<RegionId>,
    /// Devices the station can recruit per slot.
    pub capacity: u32,
    pub stats: StationStats,
    /// Combined score m_b in [0, 1], derived from `stats`.
    pub reliability: f64,
}

/// Inverse time-to-deadline: `1 / (deadline - now + epsilon)`.
pub fn urgency(task: &Task, now: Slot, epsilon: f64) -> Result<f64> {
    debug_assert!(epsilon > 0.0);
    if task.deadline < now {
        return Err(Error::ExpiredTask {
            task: task.id.0,
            deadline: task.deadline,
            now,
        });
    }
    Ok(1.0 / ((task.deadline - now) as f64 + epsilon))
}

/// Combine station statistics into a single score in [0, 1]. The delay term
/// is inverted and squashed (`1 / (1 + delay / delay_scale)`) so all three
/// components point the same way: higher is better.
pub fn station_reliability(stats: &StationStats, weights: [f64; 3], delay_scale: f64) -> f64 {
    debug_assert!(delay_scale > 0.0);
    debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    weights[0] * stats.success_rate
        + weights[1] * (1.0 / (1.0 + stats.avg_response_delay / delay_scale))
        + weights[2] * stats.utilization_rate
}

/// Priority breakdown for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityScore {
    pub task_id: TaskId,
    /// Raw urgency u_i.
    pub urgency: f64,
    /// Urgency after batch min-max normalization.
    pub urgency_normalized: f64,
    /// Home station reliability m_j.
    pub station: f64,
    /// Composite `alpha * urgency_normalized + beta * station`.
    pub composite: f64,
}

/// Scheduling weights; `alpha + beta` must be 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for SchedConfig {
    fn default() -> Self {
        SchedConfig {
            alpha: 0.8,
            beta: 0.2,
            epsilon: 1e-6,
        }
    }
}

/// A device eligible for one task, with its predicted presence probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub device: DeviceId,
    pub probability: f64,
}

/// Per-task candidate lists, each sorted by descending probability (ties
/// toward the lower device id).
pub type CandidateMap = BTreeMap<TaskId, Vec<Candidate>>;

/// Build candidate lists: a device is within reach of a task when its
/// predicted probability at the task location is at least `tau`.
pub fn build_candidates(tasks: &[Task], devices: &[DeviceForecast], tau: f64) -> CandidateMap {
    let mut map = CandidateMap::new();
    for task in tasks {
        let mut list: Vec<Candidate> = devices
            .iter()
            .filter_map(|d| {
                let p = d.distribution.prob(task.location);
                (p >= tau && p > 0.0).then_some(Candidate {
                    device: d.device,
                    probability: p,
                })
            })
            .collect();
        list.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then(a.device.cmp(&b.device))
        });
        map.insert(task.id, list);
    }
    map
}

/// The x_ij = 1 decisions of one scheduling call, in assignment order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub task: TaskId,
    pub device: DeviceId,
    pub station: StationId,
}

impl AssignmentPlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn devices_for(&self, task: TaskId) -> impl Iterator<Item = DeviceId> + '_ {
        self.assignments
            .iter()
            .filter(move |a| a.task == task)
            .map(|a| a.device)
    }
}

/// Compute priority scores for a pending batch. Urgencies are min-max
/// normalized within the batch; a batch of identical urgencies normalizes to
/// 1 (the constant cancels in the ordering).
pub fn compute_priorities(
    tasks: &[Task],
    stations: &[BaseStation],
    now: Slot,
    cfg: &SchedConfig,
) -> Result<Vec<PriorityScore>> {
    let m_of: BTreeMap<StationId, f64> = stations.iter().map(|s| (s.id, s.reliability)).collect();
    let raw: Vec<f64> = tasks
        .iter()
        .map(|t| urgency(t, now, cfg.epsilon))
        .collect::<Result<_>>()?;
    let normalized_all = min_max_normalize(&raw);
    Ok(tasks
        .iter()
        .zip(raw.iter().zip(&normalized_all))
        .map(|(t, (&u, &normalized))| {
            let station = m_of.get(&t.home_station).copied().unwrap_or(0.0);
            PriorityScore {
                task_id: t.id,
                urgency: u,
                urgency_normalized: normalized,
                station,
                composite: cfg.alpha * normalized + cfg.beta * station,
            }
        })
        .collect())
}

/// Min-max normalize into [0, 1]; a constant batch normalizes to all ones
/// (the constant cannot affect any ordering built on top).
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| {
            (lo.min(u), hi.max(u))
        });
    let span = max - min;
    values
        .iter()
        .map(|&u| if span > 0.0 { (u - min) / span } else { 1.0 })
        .collect()
}

/// Task service order under the composite priority: descending P_i, ties by
/// earlier deadline then lower task id.
pub fn mpbs_task_order(
    tasks: &[Task],
    stations: &[BaseStation],
    now: Slot,
    cfg: &SchedConfig,
) -> Result<Vec<TaskId>> {
    let scores = compute_priorities(tasks, stations, now, cfg)?;
    let by_id: BTreeMap<TaskId, &Task> = tasks.iter().map(|t| (t.id, t)).collect();
    let mut order: Vec<&PriorityScore> = scores.iter().collect();
    order.sort_by(|a, b| {
        b.composite
            .total_cmp(&a.composite)
            .then_with(|| by_id[&a.task_id].deadline.cmp(&by_id[&b.task_id].deadline))
            .then(a.task_id.cmp(&b.task_id))
    });
    Ok(order.into_iter().map(|s| s.task_id).collect())
}

/// Assign candidate devices to tasks in the given service order: each task
/// consumes its candidates (already sorted by descending probability) until
/// its requirement is met, skipping devices taken earlier this call and
/// stations at capacity.
pub(crate) fn fill_in_order(
    order: &[TaskId],
    tasks: &[Task],
    candidates: &CandidateMap,
    stations: &[BaseStation],
) -> AssignmentPlan {
    let by_id: BTreeMap<TaskId, &Task> = tasks.iter().map(|t| (t.id, t)).collect();
    let capacity: BTreeMap<StationId, u32> = stations.iter().map(|s| (s.id, s.capacity)).collect();
    let mut station_used: BTreeMap<StationId, u32> = BTreeMap::new();
    let mut taken: BTreeSet<DeviceId> = BTreeSet::new();
    let mut plan = AssignmentPlan::default();

    for task_id in order {
        let task = match by_id.get(task_id) {
            Some(t) => t,
            None => continue,
        };
        let cap = capacity.get(&task.home_station).copied().unwrap_or(0);
        let mut assigned = 0u32;
        if let Some(list) = candidates.get(task_id) {
            for cand in list {
                if assigned >= task.required {
                    break;
                }
                if *station_used.get(&task.home_station).unwrap_or(&0) >= cap {
                    break;
                }
                if !taken.insert(cand.device) {
                    continue;
                }
                plan.assignments.push(Assignment {
                    task: *task_id,
                    device: cand.device,
                    station: task.home_station,
                });
                *station_used.entry(task.home_station).or_insert(0) += 1;
                assigned += 1;
            }
        }
    }
    plan
}

/// Priority-based scheduling: rank tasks by composite priority, then fill
/// greedily. Unfillable tasks are simply left out of the plan.
pub fn schedule_mpbs(
    tasks: &[Task],
    candidates: &CandidateMap,
    stations: &[BaseStation],
    now: Slot,
    cfg: &SchedConfig,
) -> Result<AssignmentPlan> {
    debug_assert!((cfg.alpha + cfg.beta - 1.0).abs() < 1e-9 && cfg.alpha >= 0.0 && cfg.beta >= 0.0);
    let order = mpbs_task_order(tasks, stations, now, cfg)?;
    Ok(fill_in_order(&order, tasks, candidates, stations))
}

/// Everything the validator needs to re-check a plan from scratch.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub tasks: &'a [Task],
    pub stations: &'a [BaseStation],
    /// Devices eligible per task (constraint 3 as operationalized by tau).
    pub candidates: &'a CandidateMap,
}

/// One constraint violation found by [`validate_plan`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// Constraint 1: more devices than the task requires.
    TaskOverAssigned {
        task: TaskId,
        assigned: u32,
        required: u32,
    },
    /// Constraint 2: a device appears in more than one assignment.
    DeviceReused { device: DeviceId, count: u32 },
    /// Constraint 3: the device was not predicted within reach of the task.
    NotEligible { task: TaskId, device: DeviceId },
    /// Constraint 4: a station recruited beyond its capacity.
    StationOverCapacity {
        station: StationId,
        used: u32,
        capacity: u32,
    },
    /// The plan references a task the context does not know.
    UnknownTask { task: TaskId },
    /// The assignment is booked against the wrong station.
    MisroutedStation {
        task: TaskId,
        actual: StationId,
        expected: StationId,
    },
}

/// Re-derive every constraint of a plan independently of how it was built.
/// An empty result means the plan is feasible.
pub fn validate_plan(plan: &AssignmentPlan, ctx: &PlanContext<'_>) -> Vec<Violation> {
    let mut violations = Vec::new();
    let task_of: BTreeMap<TaskId, &Task> = ctx.tasks.iter().map(|t| (t.id, t)).collect();
    let capacity_of: BTreeMap<StationId, u32> =
        ctx.stations.iter().map(|s| (s.id, s.capacity)).collect();

    let mut per_task: BTreeMap<TaskId, u32> = BTreeMap::new();
    let mut per_device: BTreeMap<DeviceId, u32> = BTreeMap::new();
    let mut per_station: BTreeMap<StationId, u32> = BTreeMap::new();

    for a in &plan.assignments {
        let task = match task_of.get(&a.task) {
            Some(t) => t,
            None => {
                violations.push(Violation::UnknownTask { task: a.task });
                continue;
            }
        };
        if a.station != task.home_station {
            violations.push(Violation::MisroutedStation {
                task: a.task,
                actual: a.station,
                expected: task.home_station,
            });
        }
        let eligible = ctx
            .candidates
            .get(&a.task)
            .map(|list| list.iter().any(|c| c.device == a.device))
            .unwrap_or(false);
        if !eligible {
            violations.push(Violation::NotEligible {
                task: a.task,
                device: a.device,
            });
        }
        *per_task.entry(a.task).or_insert(0) += 1;
        *per_device.entry(a.device).or_insert(0) += 1;
        *per_station.entry(task.home_station).or_insert(0) += 1;
    }

    for (task, &assigned) in &per_task {
        let required = task_of[task].required;
        if assigned > required {
            violations.push(Violation::TaskOverAssigned {
                task: *task,
                assigned,
                required,
            });
        }
    }
    for (device, &count) in &per_device {
        if count > 1 {
            violations.push(Violation::DeviceReused {
                device: *device,
                count,
            });
        }
    }
    for (station, &used) in &per_station {
        let capacity = capacity_of.get(station).copied().unwrap_or(0);
        if used > capacity {
            violations.push(Violation::StationOverCapacity {
                station: *station,
                used,
                capacity,
            });
        }
    }
    violations
}

/// Write a plan as CSV with columns `slot,task_id,device_id,station_id`.
pub fn write_plan_csv<W: Write>(mut w: W, slot: Slot, plan: &AssignmentPlan) -> Result<()> {
    for a in &plan.assignments {
        writeln!(w, "{},{},{},{}", slot, a.task, a.device, a.station)?;
    }
    Ok(())
}
