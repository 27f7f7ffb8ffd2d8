//! Browser demo bindings: small, JSON-in/JSON-out wrappers around the core
//! pipeline so a static page can explore predictions and scheduler behavior
//! interactively.

use agsched_core::baselines::Algorithm;
use agsched_core::behavior::MoverClass;
use agsched_core::config::SimConfig;
use agsched_core::sim::{build_world, simulate_seed};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn demo_config(
    devices: u32,
    tasks: u32,
    slots: u32,
    stations: u32,
    capacity: u32,
    seed: u64,
) -> SimConfig {
    let mut c = SimConfig::default();
    c.devices = devices.clamp(4, 300);
    c.tasks = tasks.min(2000);
    c.slots = slots.clamp(1, 672);
    c.stations = stations.clamp(1, 36);
    c.station_capacity = capacity.min(50);
    c.training_days = 3;
    c.seed = seed;
    c.seeds = vec![seed];
    c
}

fn err_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

#[derive(Serialize)]
struct HeatmapResponse {
    rows: u32,
    cols: u32,
    class: String,
    device: u32,
    history: Vec<u32>,
    period: String,
    /// Probability per region, row-major.
    probs: Vec<f64>,
    /// Region the device actually moved to when the slot played out.
    actual: u32,
}

/// Predicted next-location distribution for one synthetic device.
///
/// Builds a small seeded world, picks the first device of `class`, advances
/// `slot` slots, and returns the distribution for the following slot next to
/// the region the device then actually sampled.
#[wasm_bindgen]
pub fn predict_heatmap(class: &str, seed: u32, slot: u32, steps: u32) -> String {
    match heatmap_inner(class, seed, slot, steps) {
        Ok(json) => json,
        Err(e) => err_json(e),
    }
}

fn heatmap_inner(class: &str, seed: u32, slot: u32, steps: u32) -> Result<String, String> {
    let class: MoverClass = class.parse().map_err(|e| format!("{e}"))?;
    let mut config = demo_config(16, 0, 96, 4, 2, seed as u64);
    config.slots = slot.clamp(0, 95) + 2;
    let mut world = build_world(&config, seed as u64, None).map_err(|e| e.to_string())?;
    let device = world
        .devices
        .iter()
        .find(|d| d.class == class)
        .map(|d| d.id)
        .ok_or("no device of that class in the demo world")?;

    // Play the world forward so the device has genuine recent history.
    for s in 0..slot {
        world.step(s, Algorithm::Edf).map_err(|e| e.to_string())?;
    }
    let history = world.devices[device.0 as usize].history.clone();
    let steps = steps.clamp(1, 16);
    let dist = world
        .bank
        .predict_multi(class, device, &history, slot, steps)
        .map_err(|e| e.to_string())?;

    // One more step shows where the device actually went.
    world
        .step(slot, Algorithm::Edf)
        .map_err(|e| e.to_string())?;
    let actual = *world.devices[device.0 as usize]
        .history
        .last()
        .expect("history non-empty");

    let response = HeatmapResponse {
        rows: config.grid_rows,
        cols: config.grid_cols,
        class: class.to_string(),
        device: device.0,
        history: history.iter().map(|r| r.0).collect(),
        period: format!(
            "{:?}",
            agsched_core::prediction::period_of(slot + steps, 96)
        ),
        probs: dist.probs,
        actual: actual.0,
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CompareRow {
    algorithm: String,
    tcr: f64,
    art: f64,
    du: f64,
    np: f64,
    cr: f64,
    at: f64,
}

/// Run the same seeded scenario under all five schedulers and return one
/// metrics row per algorithm.
#[wasm_bindgen]
pub fn compare_schedulers(
    devices: u32,
    tasks: u32,
    slots: u32,
    stations: u32,
    capacity: u32,
    seed: u32,
) -> String {
    let config = demo_config(devices, tasks, slots, stations, capacity, seed as u64);
    let mut rows = Vec::new();
    for algorithm in Algorithm::ALL {
        match simulate_seed(&config, algorithm, seed as u64, None) {
            Ok((m, _)) => rows.push(CompareRow {
                algorithm: algorithm.to_string(),
                tcr: m.tcr,
                art: m.art,
                du: m.du,
                np: m.np as f64,
                cr: m.cr,
                at: m.at,
            }),
            Err(e) => return err_json(e),
        }
    }
    serde_json::to_string(&rows).unwrap_or_else(err_json)
}

#[derive(Serialize)]
struct TimelinePoint {
    slot: u32,
    released: u32,
    assignments: u32,
    completed: u32,
    expired: u32,
    pending: u32,
    completed_total: u32,
}

/// Per-slot counts for one scheduler run, for the timeline chart.
#[wasm_bindgen]
pub fn simulate_timeline(
    algorithm: &str,
    devices: u32,
    tasks: u32,
    slots: u32,
    stations: u32,
    capacity: u32,
    seed: u32,
) -> String {
    let algorithm: Algorithm = match algorithm.parse() {
        Ok(a) => a,
        Err(e) => return err_json(e),
    };
    let config = demo_config(devices, tasks, slots, stations, capacity, seed as u64);
    match simulate_seed(&config, algorithm, seed as u64, None) {
        Ok((_, outcomes)) => {
            let mut total = 0;
            let points: Vec<TimelinePoint> = outcomes
                .iter()
                .map(|o| {
                    total += o.completed.len() as u32;
                    TimelinePoint {
                        slot: o.slot,
                        released: o.released.len() as u32,
                        assignments: o.plan.len() as u32,
                        completed: o.completed.len() as u32,
                        expired: o.expired.len() as u32,
                        pending: o.pending_after,
                        completed_total: total,
                    }
                })
                .collect();
            serde_json::to_string(&points).unwrap_or_else(err_json)
        }
        Err(e) => err_json(e),
    }
}
