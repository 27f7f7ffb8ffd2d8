//! Recruitment expectation estimation.
//!
//! For a task at region `l`, the expected number of recruitable devices is
//! the sum over devices of (predicted presence probability at `l`) times
//! (device reliability). Tasks whose expectation reaches their requirement
//! are locally executable; the rest get deferred by the scheduler.

use crate::error::{Error, Result};
use crate::prediction::LocationDistribution;
use crate::scheduler::Task;
use crate::types::{DeviceId, TaskId};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Beta-style prior so new devices start at 0.5 instead of an undefined or
/// overconfident score.
pub const RELIABILITY_PRIOR_SUCCESS: f64 = 1.0;
pub const RELIABILITY_PRIOR_TOTAL: f64 = 2.0;

/// Smoothed historical success fraction of a device answering invitations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityScore {
    pub successes: u32,
    pub attempts: u32,
}

impl ReliabilityScore {
    pub fn fresh() -> Self {
        ReliabilityScore {
            successes: 0,
            attempts: 0,
        }
    }

    /// Seed a score as if `successes` of `attempts` invitations succeeded.
    pub fn seeded(successes: u32, attempts: u32) -> Self {
        debug_assert!(successes <= attempts);
        ReliabilityScore {
            successes,
            attempts,
        }
    }

    /// Current score in [0, 1] under the configured prior.
    pub fn value(&self) -> f64 {
        (self.successes as f64 + RELIABILITY_PRIOR_SUCCESS)
            / (self.attempts as f64 + RELIABILITY_PRIOR_TOTAL)
    }

    /// Record one invitation outcome.
    pub fn update(self, success: bool) -> ReliabilityScore {
        ReliabilityScore {
            successes: self.successes + success as u32,
            attempts: self.attempts + 1,
        }
    }
}

/// Expectation for one task plus the local-executability flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecruitmentEstimate {
    pub task_id: TaskId,
    pub expectation: f64,
    /// True iff `expectation >= required`.
    pub locally_executable: bool,
}

/// Predicted distribution and reliability for one device, the per-device
/// inputs of the estimation loop. Callers supply these sorted ascending by
/// device id so accumulation order is fixed.
#[derive(Debug, Clone)]
pub struct DeviceForecast {
    pub device: DeviceId,
    pub distribution: LocationDistribution,
    pub reliability: f64,
}

/// Expected recruitable devices per task: `E_i = sum_j p_j(l_i) * rho_j`.
pub fn estimate(tasks: &[Task], devices: &[DeviceForecast]) -> Result<Vec<RecruitmentEstimate>> {
    estimate_pruned(tasks, devices, 0.0)
}

/// Same as [`estimate`] but devices whose presence probability at the task
/// location falls below `epsilon` are skipped. The result differs from the
/// full sum by at most `epsilon * devices.len()` per task.
pub fn estimate_pruned(
    tasks: &[Task],
    devices: &[DeviceForecast],
    epsilon: f64,
) -> Result<Vec<RecruitmentEstimate>> {
    if epsilon < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "pruning epsilon {epsilon} must be >= 0"
        )));
    }
    debug_assert!(devices.windows(2).all(|w| w[0].device < w[1].device));
    tasks
        .iter()
        .map(|task| {
            let mut expectation = 0.0;
            for d in devices {
                let p = match d.distribution.probs.get(task.location.index()) {
                    Some(&p) => p,
                    None => {
                        return Err(Error::InvalidTask {
                            task: task.id.0,
                            region: task.location.0,
                            regions: d.distribution.probs.len() as u32,
                        })
                    }
                };
                if p < epsilon {
                    continue;
                }
                expectation += p * d.reliability;
            }
            Ok(RecruitmentEstimate {
                task_id: task.id,
                expectation,
                locally_executable: expectation >= task.required as f64,
            })
        })
        .collect()
}

/// Write estimates as CSV with columns `task_id,expectation,required,locally_executable`.
pub fn write_estimates_csv<W: Write>(
    mut w: W,
    estimates: &[RecruitmentEstimate],
    required_of: impl Fn(TaskId) -> u32,
) -> Result<()> {
    writeln!(w, "task_id,expectation,required,locally_executable")?;
    for e in estimates {
        writeln!(
            w,
            "{},{:.6},{},{}",
            e.task_id,
            e.expectation,
            required_of(e.task_id),
            e.locally_executable
        )?;
    }
    Ok(())
}
