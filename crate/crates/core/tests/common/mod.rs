//! Shared random-instance generator for the scheduling test suites.

use agsched_core::grid::RegionId;
use agsched_core::prediction::LocationDistribution;
use agsched_core::recruitment::DeviceForecast;
use agsched_core::scheduler::{BaseStation, SchedConfig, StationStats, Task};
use agsched_core::types::{DeviceId, Slot, StationId, TaskId};
use rand::Rng;
use rand_pcg::Pcg64;

pub const REGIONS: u32 = 100;

pub struct Instance {
    pub tasks: Vec<Task>,
    pub forecasts: Vec<DeviceForecast>,
    pub stations: Vec<BaseStation>,
    pub now: Slot,
    pub cfg: SchedConfig,
    pub tau: f64,
}

/// Draw a bounded random scheduling instance: up to `max_tasks` tasks,
/// `max_devices` devices and `max_stations` stations over a 100-region grid.
pub fn random_instance(
    rng: &mut Pcg64,
    max_tasks: u32,
    max_devices: u32,
    max_stations: u32,
) -> Instance {
    let n_stations = rng.gen_range(1..=max_stations);
    let stations: Vec<BaseStation> = (0..n_stations)
        .map(|i| {
            let reliability = rng.gen_range(0.0..1.0);
            BaseStation {
                id: StationId(i),
                coverage: (0..REGIONS).map(RegionId).collect(),
                capacity: rng.gen_range(0..=5),
                stats: StationStats {
                    success_rate: reliability,
                    avg_response_delay: rng.gen_range(0.0..8.0),
                    utilization_rate: rng.gen_range(0.0..1.0),
                },
                reliability,
            }
        })
        .collect();

    let now: Slot = rng.gen_range(0..32);
    let n_tasks = rng.gen_range(1..=max_tasks);
    let tasks: Vec<Task> = (0..n_tasks)
        .map(|i| Task {
            id: TaskId(i),
            location: RegionId(rng.gen_range(0..REGIONS)),
            required: rng.gen_range(1..=5),
            release: now.saturating_sub(rng.gen_range(0..4)),
            deadline: now + rng.gen_range(0..16),
            home_station: StationId(rng.gen_range(0..n_stations)),
        })
        .collect();

    let n_devices = rng.gen_range(1..=max_devices);
    let forecasts: Vec<DeviceForecast> = (0..n_devices)
        .map(|i| DeviceForecast {
            device: DeviceId(i),
            distribution: random_distribution(rng),
            reliability: rng.gen_range(0.0..1.0),
        })
        .collect();

    let alpha: f64 = rng.gen_range(0.0..=1.0);
    Instance {
        tasks,
        forecasts,
        stations,
        now,
        cfg: SchedConfig {
            alpha,
            beta: 1.0 - alpha,
            epsilon: 1e-6,
        },
        tau: 0.05,
    }
}

/// A sparse-ish normalized distribution: a few peaked regions over a uniform
/// floor, like real predictions.
pub fn random_distribution(rng: &mut Pcg64) -> LocationDistribution {
    let mut probs = vec![0.0f64; REGIONS as usize];
    let peaks = rng.gen_range(1..=4);
    for _ in 0..peaks {
        let r = rng.gen_range(0..REGIONS) as usize;
        probs[r] += rng.gen_range(0.1..1.0);
    }
    if rng.gen_bool(0.5) {
        for p in probs.iter_mut() {
            *p += 0.001;
        }
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    LocationDistribution { probs }
}
