//! Discrete-time world simulation.
//!
//! Each slot proceeds in a fixed order: release tasks, expire overdue ones,
//! predict-and-move every device, build candidate lists from the same
//! predicted distributions, invoke the configured scheduler, resolve each
//! assignment as a reliability-weighted coin flip, and fold the results back
//! into device and station statistics. All randomness flows through one
//! seeded generator in a documented draw order (device setup, then tasks,
//! then per slot: moves ascending by device id, outcome draws in plan
//! order), which makes runs byte-for-byte reproducible.

use crate::baselines::{schedule_edf, schedule_greedy, schedule_hsf, schedule_lsf, Algorithm};
use crate::behavior::{
    bootstrap_labels, effective_k, extract_features, BehaviorProfile, KnnModel, MoverClass,
};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, RegionId};
use crate::ingest::{SlotEntry, SlotTrace};
use crate::metrics::{MetricsReport, SeedMetrics};
use crate::prediction::{period_of, train_model_bank, DayPeriod, ModelBank, TrainConfig};
use crate::recruitment::{estimate_pruned, DeviceForecast, ReliabilityScore};
use crate::scheduler::{
    build_candidates, station_reliability, validate_plan, AssignmentPlan, BaseStation, PlanContext,
    SchedConfig, StationStats, Task, Violation,
};
use crate::types::{DeviceId, Slot, StationId, TaskId};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// UAVs and UGVs share dynamics; the kind is a label plus an optional
/// displacement scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceKind {
    Uav,
    Ugv,
}

/// One recruitable device and its runtime state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Device {
    pub id: DeviceId,
    pub kind: DeviceKind,
    pub class: MoverClass,
    pub reliability: ReliabilityScore,
    /// Recent regions, most recent last; padded by repetition at start so
    /// every class has enough history for its chain order.
    pub history: Vec<RegionId>,
    pub assigned_task: Option<TaskId>,
}

const HISTORY_LEN: usize = 3;

/// A task plus its progress through the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskState {
    pub task: Task,
    /// Successful recruitments so far.
    pub fill: u32,
    pub released: bool,
    pub first_assignment: Option<Slot>,
    pub completed_at: Option<Slot>,
    pub expired: bool,
}

impl TaskState {
    fn pending(&self) -> bool {
        self.released && self.completed_at.is_none() && !self.expired
    }
}

/// A base station plus its sliding statistics window.
#[derive(Debug, Clone)]
pub struct StationRuntime {
    pub station: BaseStation,
    window: VecDeque<StationDelta>,
    window_len: u32,
}

/// Per-slot statistics contribution of one station.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationDelta {
    pub attempts: u32,
    pub successes: u32,
    pub delay_sum: u64,
    pub assignments: u32,
}

impl StationRuntime {
    fn new(station: BaseStation, window_len: u32) -> Self {
        StationRuntime {
            station,
            window: VecDeque::new(),
            window_len,
        }
    }

    /// Fold one slot's delta into the window and refresh the derived stats.
    fn push_slot(&mut self, delta: StationDelta, weights: [f64; 3], delay_scale: f64) {
        self.window.push_back(delta);
        while self.window.len() > self.window_len as usize {
            self.window.pop_front();
        }
        let attempts: u32 = self.window.iter().map(|d| d.attempts).sum();
        let successes: u32 = self.window.iter().map(|d| d.successes).sum();
        let delay_sum: u64 = self.window.iter().map(|d| d.delay_sum).sum();
        let assignments: u32 = self.window.iter().map(|d| d.assignments).sum();
        let dispatched = self.window.iter().filter(|d| d.assignments > 0).count();
        // Same Beta-style prior as device reliability: fresh stations sit at 0.5.
        let success_rate = (successes as f64 + 1.0) / (attempts as f64 + 2.0);
        let avg_response_delay = if assignments > 0 {
            delay_sum as f64 / assignments as f64
        } else {
            0.0
        };
        let utilization_rate = dispatched as f64 / self.window.len() as f64;
        self.station.stats = StationStats {
            success_rate,
            avg_response_delay,
            utilization_rate,
        };
        self.station.reliability = station_reliability(&self.station.stats, weights, delay_scale);
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: Slot,
    pub plan: AssignmentPlan,
    pub released: Vec<TaskId>,
    pub completed: Vec<TaskId>,
    pub expired: Vec<TaskId>,
    pub pending_after: u32,
    pub station_deltas: BTreeMap<StationId, StationDelta>,
    /// Constraint violations found by re-validating the plan against this
    /// slot's snapshot; always empty for a correct scheduler.
    pub violations: Vec<Violation>,
}

/// The full mutable simulation state for one seeded run.
pub struct World {
    pub config: SimConfig,
    pub grid: GridSpec,
    pub devices: Vec<Device>,
    pub stations: Vec<StationRuntime>,
    pub bank: ModelBank,
    pub tasks: Vec<TaskState>,
    pub profiles: Vec<BehaviorProfile>,
    pending_count: u32,
    rng: Pcg64,
}

/// Place stations on a uniform sub-grid and give each region its nearest
/// station (ties toward the lower station id).
pub fn place_stations(config: &SimConfig) -> (Vec<StationRuntime>, Vec<StationId>) {
    let rows = config.grid_rows;
    let cols = config.grid_cols;
    let count = config.station_count();
    let side = (count as f64).sqrt().ceil() as u32;
    let sites: Vec<(f64, f64)> = (0..count)
        .map(|i| {
            let pr = i / side;
            let pc = i % side;
            (
                (pr as f64 + 0.5) * rows as f64 / side as f64,
                (pc as f64 + 0.5) * cols as f64 / side as f64,
            )
        })
        .collect();

    let mut coverage: Vec<BTreeSet<RegionId>> = vec![BTreeSet::new(); count as usize];
    let mut region_station = Vec::with_capacity((rows * cols) as usize);
    for row in 0..rows {
        for col in 0..cols {
            let (cr, cc) = (row as f64 + 0.5, col as f64 + 0.5);
            let nearest = sites
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let da = (a.0 - cr).powi(2) + (a.1 - cc).powi(2);
                    let db = (b.0 - cr).powi(2) + (b.1 - cc).powi(2);
                    da.total_cmp(&db)
                })
                .map(|(i, _)| i)
                .expect("at least one station");
            coverage[nearest].insert(RegionId(row * cols + col));
            region_station.push(StationId(nearest as u32));
        }
    }

    let stations = coverage
        .into_iter()
        .enumerate()
        .map(|(i, cov)| {
            let stats = StationStats {
                success_rate: 0.5,
                avg_response_delay: 0.0,
                utilization_rate: 0.0,
            };
            let reliability = station_reliability(
                &stats,
                config.sched_reliability_weights,
                config.sched_delay_scale,
            );
            StationRuntime::new(
                BaseStation {
                    id: StationId(i as u32),
                    coverage: cov,
                    capacity: config.station_capacity,
                    stats,
                    reliability,
                },
                config.stats_window,
            )
        })
        .collect();
    (stations, region_station)
}

/// Largest-remainder split of `devices` into the four class counts.
fn class_counts(mix: [f64; 4], devices: u32) -> [u32; 4] {
    let mut counts = [0u32; 4];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut assigned = 0;
    for (i, &m) in mix.iter().enumerate() {
        let exact = m * devices as f64;
        counts[i] = exact.floor() as u32;
        assigned += counts[i];
        remainders.push((i, exact - exact.floor()));
    }
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (i, _) in remainders
        .into_iter()
        .cycle()
        .take((devices - assigned) as usize)
    {
        counts[i] += 1;
    }
    counts
}

fn neighbors(row: i64, col: i64, rows: i64, cols: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(9);
    for dr in -1..=1 {
        for dc in -1..=1 {
            let (r, c) = (row + dr, col + dc);
            if r >= 0 && r < rows && c >= 0 && c < cols {
                out.push((r, c));
            }
        }
    }
    out
}

/// Synthesize one device's training walk: commute-like targets per day
/// period with class-specific noise. Random movers ignore targets entirely.
fn synth_walk(
    rng: &mut Pcg64,
    class: MoverClass,
    step_scale: f64,
    home: (i64, i64),
    work: (i64, i64),
    rows: i64,
    cols: i64,
    len: Slot,
    slots_per_day: Slot,
) -> Vec<RegionId> {
    let noise = match class {
        MoverClass::Regular => 0.05,
        MoverClass::SemiRegular => 0.3,
        MoverClass::Localized => 0.1,
        MoverClass::Random => 1.0,
    };
    let step = step_scale.round().max(1.0) as i64;
    let mut pos = home;
    let mut out = Vec::with_capacity(len as usize);
    for s in 0..len {
        let target = match (class, period_of(s, slots_per_day)) {
            (MoverClass::Localized, _) => home,
            (_, DayPeriod::Rest) | (_, DayPeriod::CommuteHome) => home,
            (_, DayPeriod::CommuteToWork) | (_, DayPeriod::WorkHours) => work,
        };
        let wander = rng.gen::<f64>() < noise;
        pos = if wander {
            let options = neighbors(pos.0, pos.1, rows, cols);
            options[rng.gen_range(0..options.len())]
        } else {
            (
                pos.0 + (target.0 - pos.0).clamp(-step, step),
                pos.1 + (target.1 - pos.1).clamp(-step, step),
            )
        };
        out.push(RegionId((pos.0 * cols + pos.1) as u32));
    }
    out
}

/// Draw the synthetic task set. Locations are uniform over regions, release
/// slots uniform over the horizon minus the largest deadline window,
/// deadlines `release + U[4,16]`, requirements `U[1,5]`; each task is homed
/// at the station covering its location. Draws happen in a fixed per-task
/// order (location, release, window, required).
pub fn generate_tasks(
    config: &SimConfig,
    region_station: &[StationId],
    rng: &mut Pcg64,
) -> Vec<Task> {
    const WINDOW_MIN: u32 = 4;
    const WINDOW_MAX: u32 = 16;
    const REQUIRED_MAX: u32 = 5;
    let regions = config.num_regions();
    let release_max = config.slots.saturating_sub(WINDOW_MAX);
    (0..config.tasks)
        .map(|i| {
            let location = RegionId(rng.gen_range(0..regions));
            let release = rng.gen_range(0..=release_max);
            let window = rng.gen_range(WINDOW_MIN..=WINDOW_MAX);
            let required = rng.gen_range(1..=REQUIRED_MAX);
            Task {
                id: TaskId(i),
                location,
                required,
                release,
                deadline: release + window,
                home_station: region_station[location.index()],
            }
        })
        .collect()
}

/// Build a ready-to-run world. With `traces`, devices inherit real mobility:
/// models are trained on the traces and classes come from the bootstrap+KNN
/// pipeline. Without traces, devices follow class-parameterized synthetic
/// walks and carry their configured class directly.
pub fn build_world(config: &SimConfig, seed: u64, traces: Option<&[SlotTrace]>) -> Result<World> {
    config.validate()?;
    let grid = GridSpec::new(0.0, 1.0, 0.0, 1.0, config.grid_rows, config.grid_cols)?;
    let (stations, region_station) = place_stations(config);
    let mut rng = Pcg64::seed_from_u64(seed);

    let spd = config.slots_per_day();
    let train_config = TrainConfig {
        slots_per_day: spd,
        num_regions: config.num_regions(),
        smoothing: config.markov_smoothing,
        regular_second_order: config.markov_regular_second_order,
        fallback_uniform: config.markov_fallback_uniform,
    };

    let uav_count = (config.devices as f64 * config.uav_fraction).round() as u32;
    let kind_of = |i: u32| {
        if i < uav_count {
            DeviceKind::Uav
        } else {
            DeviceKind::Ugv
        }
    };
    let scale_of = |kind: DeviceKind| match kind {
        DeviceKind::Uav => config.displacement_scale_uav,
        DeviceKind::Ugv => config.displacement_scale_ugv,
    };

    let (device_traces, classes): (Vec<SlotTrace>, Vec<MoverClass>) = match traces {
        Some(all) => {
            let usable: Vec<&SlotTrace> = all.iter().filter(|t| t.entries.len() >= 2).collect();
            if (config.devices as usize) > usable.len() {
                return Err(Error::InvalidConfig(format!(
                    "sim.devices = {} but only {} usable trace devices are available",
                    config.devices,
                    usable.len()
                )));
            }
            let selected: Vec<SlotTrace> = usable
                .into_iter()
                .take(config.devices as usize)
                .cloned()
                .collect();
            let features: Vec<_> = selected
                .iter()
                .map(|t| extract_features(t, &grid, spd))
                .collect::<Result<_>>()?;
            let seeds = bootstrap_labels(&features, &config.labels);
            let training: Vec<_> = features
                .iter()
                .copied()
                .zip(seeds.iter().copied())
                .collect();
            let k = effective_k(config.knn_k, training.len());
            let knn = KnnModel::fit(&training, k)?;
            let classes = features.iter().map(|f| knn.classify(f)).collect();
            (selected, classes)
        }
        None => {
            let counts = class_counts(config.class_mix, config.devices);
            let mut classes = Vec::with_capacity(config.devices as usize);
            for (ci, &n) in counts.iter().enumerate() {
                classes.extend(std::iter::repeat_n(MoverClass::ALL[ci], n as usize));
            }
            let rows = config.grid_rows as i64;
            let cols = config.grid_cols as i64;
            let len = config.training_days * spd;
            let walks = classes
                .iter()
                .enumerate()
                .map(|(i, &class)| {
                    let home = (rng.gen_range(0..rows), rng.gen_range(0..cols));
                    let work = (rng.gen_range(0..rows), rng.gen_range(0..cols));
                    let scale = scale_of(kind_of(i as u32));
                    let regions =
                        synth_walk(&mut rng, class, scale, home, work, rows, cols, len, spd);
                    SlotTrace {
                        device_id: format!("synthetic-{i:04}"),
                        entries: regions
                            .into_iter()
                            .enumerate()
                            .map(|(s, region)| SlotEntry {
                                slot: s as Slot,
                                region,
                            })
                            .collect(),
                    }
                })
                .collect();
            (walks, classes)
        }
    };

    let bank = train_model_bank(&device_traces, train_config)?;

    let mut devices = Vec::with_capacity(config.devices as usize);
    let mut profiles = Vec::with_capacity(config.devices as usize);
    for (i, (trace, &class)) in device_traces.iter().zip(&classes).enumerate() {
        let id = DeviceId(i as u32);
        // Heterogeneous starting reliabilities, one draw per device.
        let q = rng.gen_range(0.25..0.95);
        let attempts = 18u32;
        let successes = (q * attempts as f64).round() as u32;
        let mut history: Vec<RegionId> = trace
            .entries
            .iter()
            .rev()
            .take(HISTORY_LEN)
            .map(|e| e.region)
            .collect();
        history.reverse();
        while history.len() < HISTORY_LEN {
            let first = history.first().copied().unwrap_or(RegionId(0));
            history.insert(0, first);
        }
        let features = extract_features(trace, &grid, spd)?;
        profiles.push(BehaviorProfile {
            device_id: id,
            features,
            class,
        });
        devices.push(Device {
            id,
            kind: kind_of(i as u32),
            class,
            reliability: ReliabilityScore::seeded(successes, attempts),
            history,
            assigned_task: None,
        });
    }

    let tasks = generate_tasks(config, &region_station, &mut rng)
        .into_iter()
        .map(|task| TaskState {
            task,
            fill: 0,
            released: false,
            first_assignment: None,
            completed_at: None,
            expired: false,
        })
        .collect();

    Ok(World {
        config: config.clone(),
        grid,
        devices,
        stations,
        bank,
        tasks,
        profiles,
        pending_count: 0,
        rng,
    })
}

impl World {
    pub fn pending_count(&self) -> u32 {
        self.pending_count
    }

    pub fn station_snapshot(&self) -> Vec<BaseStation> {
        self.stations.iter().map(|s| s.station.clone()).collect()
    }

    /// Advance one slot under the given algorithm.
    pub fn step(&mut self, slot: Slot, algorithm: Algorithm) -> Result<SlotOutcome> {
        let pending_before = self.pending_count;

        // (1) Release.
        let mut released = Vec::new();
        for ts in &mut self.tasks {
            if !ts.released && ts.task.release == slot {
                ts.released = true;
                released.push(ts.task.id);
            }
        }

        // (2) Expire strictly overdue tasks.
        let mut expired = Vec::new();
        for ts in &mut self.tasks {
            if ts.pending() && ts.task.deadline < slot {
                ts.expired = true;
                expired.push(ts.task.id);
            }
        }

        // (3) Predict and move every unassigned device, ascending by id. The
        // move samples the same distribution the scheduler sees, so the
        // candidate probabilities are exactly the law the position follows.
        let mut forecasts = Vec::with_capacity(self.devices.len());
        for device in &mut self.devices {
            let dist = self
                .bank
                .predict(device.class, device.id, &device.history, slot)?;
            if device.assigned_task.is_none() {
                let u = self.rng.gen::<f64>();
                let region = dist.sample(u);
                device.history.push(region);
                if device.history.len() > HISTORY_LEN {
                    device.history.remove(0);
                }
            }
            forecasts.push(DeviceForecast {
                device: device.id,
                distribution: dist,
                reliability: device.reliability.value(),
            });
        }

        // (4) Candidate lists over the pending batch, requirements reduced by
        // successes already banked.
        let view: Vec<Task> = self
            .tasks
            .iter()
            .filter(|ts| ts.pending())
            .map(|ts| Task {
                required: ts.task.required - ts.fill,
                ..ts.task
            })
            .collect();
        let candidates = build_candidates(&view, &forecasts, self.config.sched_tau);
        let stations = self.station_snapshot();

        // (5) Schedule.
        let sched_cfg = SchedConfig {
            alpha: self.config.sched_alpha,
            beta: self.config.sched_beta,
            epsilon: self.config.sched_epsilon,
        };
        let plan = match algorithm {
            Algorithm::Mpbs => {
                // Successes accumulate until the deadline, so a task is
                // deferred only when even its whole remaining lifetime of
                // per-slot expectation cannot cover the remaining need --
                // and never in its deadline slot, where no later time exists.
                let estimates = estimate_pruned(&view, &forecasts, self.config.prune_epsilon)?;
                let executable: BTreeSet<TaskId> = estimates
                    .iter()
                    .zip(&view)
                    .filter(|(e, t)| {
                        let horizon = (t.deadline - slot + 1) as f64;
                        e.expectation * horizon >= t.required as f64
                    })
                    .map(|(e, _)| e.task_id)
                    .collect();
                let schedulable: Vec<Task> = view
                    .iter()
                    .filter(|t| executable.contains(&t.id) || t.deadline == slot)
                    .copied()
                    .collect();
                crate::scheduler::schedule_mpbs(
                    &schedulable,
                    &candidates,
                    &stations,
                    slot,
                    &sched_cfg,
                )?
            }
            Algorithm::Greedy => schedule_greedy(&view, &candidates, &stations, slot),
            Algorithm::Hsf => {
                let cost: BTreeMap<DeviceId, f64> =
                    self.devices.iter().map(|d| (d.id, 1.0)).collect();
                schedule_hsf(
                    &view,
                    &candidates,
                    &stations,
                    slot,
                    &cost,
                    self.config.hsf_min_gain,
                )?
            }
            Algorithm::Edf => schedule_edf(&view, &candidates, &stations, slot),
            Algorithm::Lsf => schedule_lsf(
                &view,
                &candidates,
                &stations,
                slot,
                self.config.lsf_service_estimate,
            ),
        };
        let violations = validate_plan(
            &plan,
            &PlanContext {
                tasks: &view,
                stations: &stations,
                candidates: &candidates,
            },
        );
        debug_assert!(violations.is_empty(), "infeasible plan: {violations:?}");

        // (6) Resolve assignments in plan order; success probability is the
        // device's current reliability score.
        let mut completed = Vec::new();
        let mut station_deltas: BTreeMap<StationId, StationDelta> = BTreeMap::new();
        for a in &plan.assignments {
            let device = &mut self.devices[a.device.0 as usize];
            device.assigned_task = Some(a.task);
            let rho = device.reliability.value();
            let success = self.rng.gen::<f64>() < rho;
            device.reliability = device.reliability.update(success);

            let ts = self
                .tasks
                .iter_mut()
                .find(|ts| ts.task.id == a.task)
                .expect("plan references a known task");
            ts.first_assignment.get_or_insert(slot);
            let delta = station_deltas.entry(a.station).or_default();
            delta.attempts += 1;
            delta.assignments += 1;
            delta.delay_sum += (slot - ts.task.release) as u64;
            if success {
                delta.successes += 1;
                ts.fill += 1;
                if ts.fill >= ts.task.required && ts.completed_at.is_none() {
                    ts.completed_at = Some(slot);
                    completed.push(ts.task.id);
                }
            }
        }

        // (7) Fold slot statistics into every station window and release the
        // per-slot assignments.
        for st in &mut self.stations {
            let delta = station_deltas
                .get(&st.station.id)
                .copied()
                .unwrap_or_default();
            st.push_slot(
                delta,
                self.config.sched_reliability_weights,
                self.config.sched_delay_scale,
            );
        }
        for device in &mut self.devices {
            device.assigned_task = None;
        }

        self.pending_count = self.tasks.iter().filter(|ts| ts.pending()).count() as u32;
        debug_assert_eq!(
            self.pending_count as i64,
            pending_before as i64 + released.len() as i64
                - completed.len() as i64
                - expired.len() as i64,
            "slot conservation violated"
        );

        Ok(SlotOutcome {
            slot,
            plan,
            released,
            completed,
            expired,
            pending_after: self.pending_count,
            station_deltas,
            violations,
        })
    }

    /// Run every slot and collect the outcomes.
    pub fn run(&mut self, algorithm: Algorithm) -> Result<Vec<SlotOutcome>> {
        let mut outcomes = Vec::with_capacity(self.config.slots as usize);
        for slot in 0..self.config.slots {
            outcomes.push(self.step(slot, algorithm)?);
        }
        Ok(outcomes)
    }

    /// Compute the run metrics from final task state and slot outcomes.
    pub fn metrics(&self, seed: u64, outcomes: &[SlotOutcome]) -> SeedMetrics {
        let total_tasks = self.tasks.len() as u32;
        let completed: Vec<&TaskState> = self
            .tasks
            .iter()
            .filter(|ts| ts.completed_at.is_some())
            .collect();
        let expired = self.tasks.iter().filter(|ts| ts.expired).count() as u32;
        let assigned: Vec<&TaskState> = self
            .tasks
            .iter()
            .filter(|ts| ts.first_assignment.is_some())
            .collect();

        let ratio = |n: usize| {
            if total_tasks == 0 {
                0.0
            } else {
                n as f64 / total_tasks as f64
            }
        };
        let art = if assigned.is_empty() {
            0.0
        } else {
            assigned
                .iter()
                .map(|ts| (ts.first_assignment.unwrap() - ts.task.release) as f64)
                .sum::<f64>()
                / assigned.len() as f64
        };
        let at = if completed.is_empty() {
            0.0
        } else {
            completed
                .iter()
                .map(|ts| (ts.completed_at.unwrap() - ts.task.release) as f64)
                .sum::<f64>()
                / completed.len() as f64
        };
        let du = if outcomes.is_empty() {
            0.0
        } else {
            outcomes
                .iter()
                .map(|o| o.plan.len() as f64 / self.devices.len() as f64)
                .sum::<f64>()
                / outcomes.len() as f64
        };
        let np: u64 = completed.iter().map(|ts| ts.task.required as u64).sum();
        let total_assignments: u64 = outcomes.iter().map(|o| o.plan.len() as u64).sum();

        SeedMetrics {
            seed,
            tcr: ratio(completed.len()),
            art,
            du,
            np,
            cr: ratio(completed.len()),
            at,
            completed: completed.len() as u32,
            expired,
            total_tasks,
            total_assignments,
        }
    }
}

/// One full seeded run: build, simulate, measure.
pub fn simulate_seed(
    config: &SimConfig,
    algorithm: Algorithm,
    seed: u64,
    traces: Option<&[SlotTrace]>,
) -> Result<(SeedMetrics, Vec<SlotOutcome>)> {
    let mut world = build_world(config, seed, traces)?;
    let outcomes = world.run(algorithm)?;
    let metrics = world.metrics(seed, &outcomes);
    Ok((metrics, outcomes))
}

/// Run the configured seed list under one algorithm and aggregate.
pub fn run_scenario_with(
    config: &SimConfig,
    algorithm: Algorithm,
    traces: Option<&[SlotTrace]>,
) -> Result<MetricsReport> {
    let per_seed = config
        .seed_list()
        .into_iter()
        .map(|seed| simulate_seed(config, algorithm, seed, traces).map(|(m, _)| m))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::aggregate(algorithm.to_string(), per_seed))
}

/// Run with the first configured algorithm.
pub fn run_scenario(config: &SimConfig) -> Result<MetricsReport> {
    run_scenario_with(config, config.algorithms[0], None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        let mut c = SimConfig::default();
        c.devices = 8;
        c.tasks = 20;
        c.slots = 48;
        c.stations = 2;
        c.station_capacity = 2;
        c.training_days = 2;
        c.seed = 7;
        c
    }

    #[test]
    fn four_synthetic_devices_cover_all_classes() {
        let mut c = small_config();
        c.devices = 4;
        let world = build_world(&c, 1, None).unwrap();
        let classes: Vec<MoverClass> = world.devices.iter().map(|d| d.class).collect();
        assert_eq!(
            classes,
            vec![
                MoverClass::Regular,
                MoverClass::SemiRegular,
                MoverClass::Localized,
                MoverClass::Random
            ]
        );
    }

    #[test]
    fn single_station_covers_whole_grid() {
        let mut c = small_config();
        c.stations = 1;
        let (stations, region_station) = place_stations(&c);
        assert_eq!(stations.len(), 1);
        assert_eq!(stations[0].station.coverage.len(), 100);
        assert!(region_station.iter().all(|&s| s == StationId(0)));
    }

    #[test]
    fn generated_tasks_are_well_formed() {
        let c = small_config();
        let (_, region_station) = place_stations(&c);
        let mut rng = Pcg64::seed_from_u64(1);
        let tasks = generate_tasks(&c, &region_station, &mut rng);
        assert_eq!(tasks.len(), 20);
        for t in &tasks {
            assert!(t.deadline >= t.release);
            assert!(t.location.0 < c.num_regions());
            assert!((1..=5).contains(&t.required));
            assert_eq!(t.home_station, region_station[t.location.index()]);
        }
    }

    #[test]
    fn task_generation_is_seed_sensitive_and_reproducible() {
        let c = small_config();
        let (_, region_station) = place_stations(&c);
        let mut a = Pcg64::seed_from_u64(1);
        let mut b = Pcg64::seed_from_u64(1);
        let mut d = Pcg64::seed_from_u64(9);
        assert_eq!(
            generate_tasks(&c, &region_station, &mut a),
            generate_tasks(&c, &region_station, &mut b)
        );
        assert_ne!(
            generate_tasks(&c, &region_station, &mut a),
            generate_tasks(&c, &region_station, &mut d)
        );
    }

    #[test]
    fn zero_tasks_yield_empty_plans_but_devices_still_move() {
        let mut c = small_config();
        c.tasks = 0;
        let mut world = build_world(&c, 3, None).unwrap();
        let before: Vec<Vec<RegionId>> = world.devices.iter().map(|d| d.history.clone()).collect();
        let outcomes = world.run(Algorithm::Mpbs).unwrap();
        let m = world.metrics(3, &outcomes);
        assert_eq!(m.tcr, 0.0);
        assert_eq!(m.completed, 0);
        assert!(outcomes.iter().all(|o| o.plan.is_empty()));
        let after: Vec<Vec<RegionId>> = world.devices.iter().map(|d| d.history.clone()).collect();
        assert_ne!(before, after, "movement must continue without tasks");
    }

    #[test]
    fn capacity_zero_stations_schedule_nothing_but_devices_move() {
        let mut c = small_config();
        c.station_capacity = 0;
        let (m, outcomes) = simulate_seed(&c, Algorithm::Edf, 3, None).unwrap();
        assert_eq!(m.tcr, 0.0);
        assert_eq!(m.du, 0.0);
        assert!(outcomes.iter().all(|o| o.plan.is_empty()));
    }

    #[test]
    fn conservation_holds_every_slot() {
        let c = small_config();
        let (_, outcomes) = simulate_seed(&c, Algorithm::Mpbs, 11, None).unwrap();
        let mut pending = 0i64;
        for o in &outcomes {
            pending += o.released.len() as i64 - o.completed.len() as i64 - o.expired.len() as i64;
            assert_eq!(pending, o.pending_after as i64, "slot {}", o.slot);
        }
    }

    #[test]
    fn identical_seeds_are_byte_identical() {
        let c = small_config();
        for algorithm in Algorithm::ALL {
            let (m1, o1) = simulate_seed(&c, algorithm, 5, None).unwrap();
            let (m2, o2) = simulate_seed(&c, algorithm, 5, None).unwrap();
            let a = serde_json::to_vec(&o1).unwrap();
            let b = serde_json::to_vec(&o2).unwrap();
            assert_eq!(a, b, "{algorithm} slot outcomes diverged");
            assert_eq!(
                serde_json::to_vec(&m1).unwrap(),
                serde_json::to_vec(&m2).unwrap()
            );
        }
    }

    #[test]
    fn certain_device_completes_single_task_immediately() {
        let mut c = small_config();
        c.devices = 1;
        c.tasks = 1;
        c.stations = 1;
        c.station_capacity = 1;
        c.class_mix = [0.0, 0.0, 1.0, 0.0]; // Localized: stays at its dwell region
        c.sched_tau = 0.5;
        let mut world = build_world(&c, 2, None).unwrap();
        // Pin the single task onto the device's dwell region with an
        // essentially certain device.
        let dwell = world.bank.dwell[&DeviceId(0)];
        world.devices[0].reliability = ReliabilityScore::seeded(1_000_000, 1_000_000);
        world.tasks[0].task.location = dwell;
        world.tasks[0].task.release = 0;
        world.tasks[0].task.deadline = 0;
        world.tasks[0].task.required = 1;
        world.tasks[0].task.home_station = StationId(0);
        let outcomes = world.run(Algorithm::Mpbs).unwrap();
        let m = world.metrics(2, &outcomes);
        assert_eq!(m.tcr, 1.0);
        assert_eq!(m.art, 0.0);
        assert_eq!(outcomes[0].completed, vec![TaskId(0)]);
    }

    #[test]
    fn low_expectation_task_is_deferred_until_last_chance() {
        let mut c = small_config();
        c.devices = 1;
        c.tasks = 1;
        c.stations = 1;
        c.station_capacity = 1;
        c.class_mix = [0.0, 0.0, 1.0, 0.0];
        c.sched_tau = 0.5;
        let mut world = build_world(&c, 2, None).unwrap();
        let dwell = world.bank.dwell[&DeviceId(0)];
        // One device at reliability 0.5 against a requirement of 5: even the
        // whole remaining lifetime of expectation (0.5 * 7 = 3.5) cannot
        // cover it, so the task defers until its deadline slot.
        world.devices[0].reliability = ReliabilityScore::fresh();
        world.tasks[0].task.location = dwell;
        world.tasks[0].task.release = 0;
        world.tasks[0].task.deadline = 6;
        world.tasks[0].task.required = 5;
        world.tasks[0].task.home_station = StationId(0);
        let outcomes = world.run(Algorithm::Mpbs).unwrap();
        for o in &outcomes[..6] {
            assert!(o.plan.is_empty(), "slot {} should defer", o.slot);
        }
        assert_eq!(outcomes[6].plan.len(), 1);
    }

    #[test]
    fn no_device_is_double_booked_within_a_slot() {
        let c = small_config();
        for algorithm in Algorithm::ALL {
            let (_, outcomes) = simulate_seed(&c, algorithm, 13, None).unwrap();
            for o in &outcomes {
                let mut seen = BTreeSet::new();
                for a in &o.plan.assignments {
                    assert!(seen.insert(a.device), "{algorithm} reused a device");
                }
            }
        }
    }
}
