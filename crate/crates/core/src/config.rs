//! Flat key-value run configuration.
//!
//! A config file is a single JSON object whose keys are the dotted names
//! below (`{"grid.rows": 10, "sched.alpha": 0.8, ...}`). Unknown keys are
//! rejected so typos fail loudly. CLI flags override file values, file
//! values override the defaults.

use crate::baselines::Algorithm;
use crate::behavior::LabelThresholds;
use crate::error::{Error, Result};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    // Grid and time discretization.
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub grid_trim_quantile: f64,
    pub slot_minutes: u32,
    pub utc_offset_hours: i32,

    // Behavior classification.
    pub knn_k: usize,
    pub labels: LabelThresholds,

    // Markov models.
    pub markov_smoothing: f64,
    pub markov_regular_second_order: bool,
    pub markov_fallback_uniform: bool,

    // Scheduling.
    pub sched_alpha: f64,
    pub sched_beta: f64,
    pub sched_epsilon: f64,
    pub sched_tau: f64,
    pub sched_reliability_weights: [f64; 3],
    pub sched_delay_scale: f64,
    pub algorithms: Vec<Algorithm>,
    pub hsf_min_gain: f64,
    pub lsf_service_estimate: u32,

    // Scenario.
    pub devices: u32,
    pub tasks: u32,
    pub slots: u32,
    /// Explicit station count; 0 derives one station per `station_ratio`
    /// devices (the 5:5:1 UAV:UGV:station split).
    pub stations: u32,
    pub station_ratio: u32,
    pub station_capacity: u32,
    pub seed: u64,
    /// Explicit seed list; empty means `[seed]`.
    pub seeds: Vec<u64>,
    /// Fraction of devices per class: Regular, SemiRegular, Localized, Random.
    pub class_mix: [f64; 4],
    /// Days of synthetic history generated to train the models.
    pub training_days: u32,
    /// Sliding window (slots) for station statistics.
    pub stats_window: u32,
    pub uav_fraction: f64,
    pub displacement_scale_uav: f64,
    pub displacement_scale_ugv: f64,
    /// Pruning threshold for recruitment estimates inside the simulator.
    pub prune_epsilon: f64,
    /// Node counts for sweep runs (devices + stations per count).
    pub sweep_nodes: Vec<u32>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid_rows: 10,
            grid_cols: 10,
            grid_trim_quantile: 0.01,
            slot_minutes: 15,
            utc_offset_hours: 8,
            knn_k: 5,
            labels: LabelThresholds::default(),
            markov_smoothing: 0.0,
            markov_regular_second_order: false,
            markov_fallback_uniform: true,
            sched_alpha: 0.8,
            sched_beta: 0.2,
            sched_epsilon: 1e-6,
            sched_tau: 0.1,
            sched_reliability_weights: [0.5, 0.25, 0.25],
            sched_delay_scale: 4.0,
            algorithms: vec![Algorithm::Mpbs],
            hsf_min_gain: 0.0,
            lsf_service_estimate: 1,
            devices: 300,
            tasks: 1000,
            slots: 96,
            stations: 0,
            station_ratio: 10,
            station_capacity: 5,
            seed: 42,
            seeds: Vec::new(),
            class_mix: [0.25; 4],
            training_days: 5,
            stats_window: 32,
            uav_fraction: 0.5,
            displacement_scale_uav: 1.0,
            displacement_scale_ugv: 1.0,
            prune_epsilon: 0.0,
            sweep_nodes: Vec::new(),
        }
    }
}

impl SimConfig {
    /// Parse a flat JSON object of dotted keys over the defaults.
    pub fn from_flat_json(value: &Value) -> Result<SimConfig> {
        let mut config = SimConfig::default();
        config.apply_flat_json(value)?;
        config.validate()?;
        Ok(config)
    }

    /// Overlay the keys of a flat JSON object onto this config.
    pub fn apply_flat_json(&mut self, value: &Value) -> Result<()> {
        let map = value
            .as_object()
            .ok_or_else(|| Error::InvalidConfig("config must be a JSON object".into()))?;
        for (key, v) in map {
            self.apply(key, v)?;
        }
        Ok(())
    }

    /// Set one dotted key from a JSON value.
    pub fn apply(&mut self, key: &str, v: &Value) -> Result<()> {
        match key {
            "grid.rows" => self.grid_rows = as_u32(key, v)?,
            "grid.cols" => self.grid_cols = as_u32(key, v)?,
            "grid.trim_quantile" => self.grid_trim_quantile = as_f64(key, v)?,
            "slot.minutes" => self.slot_minutes = as_u32(key, v)?,
            "time.utc_offset_hours" => self.utc_offset_hours = as_i32(key, v)?,
            "knn.k" => self.knn_k = as_u32(key, v)? as usize,
            "labels.entropy_low" => self.labels.entropy_low = as_f64(key, v)?,
            "labels.entropy_high" => self.labels.entropy_high = as_f64(key, v)?,
            "labels.displacement_low" => self.labels.displacement_low = as_f64(key, v)?,
            "labels.dwell_high" => self.labels.dwell_high = as_f64(key, v)?,
            "markov.smoothing" => self.markov_smoothing = as_f64(key, v)?,
            "markov.regular_second_order" => self.markov_regular_second_order = as_bool(key, v)?,
            "markov.fallback_uniform" => self.markov_fallback_uniform = as_bool(key, v)?,
            "sched.alpha" => self.sched_alpha = as_f64(key, v)?,
            "sched.beta" => self.sched_beta = as_f64(key, v)?,
            "sched.epsilon" => self.sched_epsilon = as_f64(key, v)?,
            "sched.tau" => self.sched_tau = as_f64(key, v)?,
            "sched.reliability_weights" => {
                let arr = as_f64_array(key, v)?;
                if arr.len() != 3 {
                    return Err(Error::InvalidConfig(format!("{key} needs 3 weights")));
                }
                self.sched_reliability_weights = [arr[0], arr[1], arr[2]];
            }
            "sched.delay_scale" => self.sched_delay_scale = as_f64(key, v)?,
            "sched.algorithm" => self.algorithms = parse_algorithms(v)?,
            "sched.hsf_min_gain" => self.hsf_min_gain = as_f64(key, v)?,
            "sched.lsf_service_estimate" => self.lsf_service_estimate = as_u32(key, v)?,
            "sim.devices" => self.devices = as_u32(key, v)?,
            "sim.tasks" => self.tasks = as_u32(key, v)?,
            "sim.slots" => self.slots = as_u32(key, v)?,
            "sim.stations" => self.stations = as_u32(key, v)?,
            "sim.station_ratio" => self.station_ratio = as_u32(key, v)?,
            "sim.station_capacity" => self.station_capacity = as_u32(key, v)?,
            "sim.seed" => self.seed = as_u64(key, v)?,
            "sim.seeds" => {
                self.seeds = as_u64_array(key, v)?;
            }
            "sim.class_mix" => {
                let arr = as_f64_array(key, v)?;
                if arr.len() != 4 {
                    return Err(Error::InvalidConfig(format!("{key} needs 4 fractions")));
                }
                self.class_mix = [arr[0], arr[1], arr[2], arr[3]];
            }
            "sim.training_days" => self.training_days = as_u32(key, v)?,
            "sim.stats_window" => self.stats_window = as_u32(key, v)?,
            "sim.uav_fraction" => self.uav_fraction = as_f64(key, v)?,
            "sim.displacement_scale_uav" => self.displacement_scale_uav = as_f64(key, v)?,
            "sim.displacement_scale_ugv" => self.displacement_scale_ugv = as_f64(key, v)?,
            "sim.prune_epsilon" => self.prune_epsilon = as_f64(key, v)?,
            "sim.sweep_nodes" => {
                self.sweep_nodes = as_u64_array(key, v)?
                    .into_iter()
                    .map(|n| n as u32)
                    .collect();
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key '{other}'"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return fail("grid.rows and grid.cols must be >= 1".into());
        }
        if self.grid_rows as u64 * self.grid_cols as u64 > u16::MAX as u64 {
            return fail(format!("grid exceeds {} regions", u16::MAX));
        }
        if !(0.0..0.5).contains(&self.grid_trim_quantile) {
            return fail("grid.trim_quantile must be in [0, 0.5)".into());
        }
        if self.slot_minutes == 0 || 1440 % self.slot_minutes != 0 {
            return fail("slot.minutes must divide 1440 evenly".into());
        }
        if self.knn_k == 0 || self.knn_k % 2 == 0 {
            return fail("knn.k must be odd and >= 1".into());
        }
        if self.markov_smoothing < 0.0 {
            return fail("markov.smoothing must be >= 0".into());
        }
        if self.sched_alpha < 0.0
            || self.sched_beta < 0.0
            || (self.sched_alpha + self.sched_beta - 1.0).abs() > 1e-9
        {
            return fail("sched.alpha and sched.beta must be nonnegative and sum to 1".into());
        }
        if self.sched_epsilon <= 0.0 {
            return fail("sched.epsilon must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.sched_tau) {
            return fail("sched.tau must be in [0, 1]".into());
        }
        let wsum: f64 = self.sched_reliability_weights.iter().sum();
        if self.sched_reliability_weights.iter().any(|&w| w < 0.0) || (wsum - 1.0).abs() > 1e-9 {
            return fail("sched.reliability_weights must be nonnegative and sum to 1".into());
        }
        if self.sched_delay_scale <= 0.0 {
            return fail("sched.delay_scale must be > 0".into());
        }
        if self.algorithms.is_empty() {
            return fail("sched.algorithm must name at least one algorithm".into());
        }
        if self.hsf_min_gain < 0.0 {
            return fail("sched.hsf_min_gain must be >= 0".into());
        }
        if self.devices == 0 || self.slots == 0 {
            return fail("sim.devices and sim.slots must be >= 1".into());
        }
        if self.stations == 0 && self.station_ratio == 0 {
            return fail("sim.station_ratio must be >= 1 when sim.stations is 0".into());
        }
        let mix_sum: f64 = self.class_mix.iter().sum();
        if self.class_mix.iter().any(|&m| m < 0.0) || (mix_sum - 1.0).abs() > 1e-9 {
            return fail("sim.class_mix must be nonnegative and sum to 1".into());
        }
        if self.training_days == 0 {
            return fail("sim.training_days must be >= 1".into());
        }
        if self.stats_window == 0 {
            return fail("sim.stats_window must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.uav_fraction) {
            return fail("sim.uav_fraction must be in [0, 1]".into());
        }
        if self.displacement_scale_uav < 1.0 || self.displacement_scale_ugv < 1.0 {
            return fail("displacement scales must be >= 1".into());
        }
        if self.prune_epsilon < 0.0 {
            return fail("sim.prune_epsilon must be >= 0".into());
        }
        Ok(())
    }

    /// Slots per day implied by the slot length.
    pub fn slots_per_day(&self) -> u32 {
        1440 / self.slot_minutes
    }

    pub fn num_regions(&self) -> u32 {
        self.grid_rows * self.grid_cols
    }

    /// Station count, derived from the device ratio unless set explicitly.
    pub fn station_count(&self) -> u32 {
        if self.stations > 0 {
            self.stations
        } else {
            (self.devices / self.station_ratio).max(1)
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Canonical flat representation; keys come out sorted, which keeps
    /// manifests byte-stable.
    pub fn to_flat_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        let mut put = |k: &str, v: Value| {
            map.insert(k.to_string(), v);
        };
        put("grid.rows", self.grid_rows.into());
        put("grid.cols", self.grid_cols.into());
        put("grid.trim_quantile", json_f64(self.grid_trim_quantile));
        put("slot.minutes", self.slot_minutes.into());
        put("time.utc_offset_hours", self.utc_offset_hours.into());
        put("knn.k", (self.knn_k as u64).into());
        put("labels.entropy_low", json_f64(self.labels.entropy_low));
        put("labels.entropy_high", json_f64(self.labels.entropy_high));
        put(
            "labels.displacement_low",
            json_f64(self.labels.displacement_low),
        );
        put("labels.dwell_high", json_f64(self.labels.dwell_high));
        put("markov.smoothing", json_f64(self.markov_smoothing));
        put(
            "markov.regular_second_order",
            self.markov_regular_second_order.into(),
        );
        put(
            "markov.fallback_uniform",
            self.markov_fallback_uniform.into(),
        );
        put("sched.alpha", json_f64(self.sched_alpha));
        put("sched.beta", json_f64(self.sched_beta));
        put("sched.epsilon", json_f64(self.sched_epsilon));
        put("sched.tau", json_f64(self.sched_tau));
        put(
            "sched.reliability_weights",
            Value::Array(
                self.sched_reliability_weights
                    .iter()
                    .map(|&w| json_f64(w))
                    .collect(),
            ),
        );
        put("sched.delay_scale", json_f64(self.sched_delay_scale));
        put(
            "sched.algorithm",
            Value::Array(
                self.algorithms
                    .iter()
                    .map(|a| Value::String(a.to_string()))
                    .collect(),
            ),
        );
        put("sched.hsf_min_gain", json_f64(self.hsf_min_gain));
        put(
            "sched.lsf_service_estimate",
            self.lsf_service_estimate.into(),
        );
        put("sim.devices", self.devices.into());
        put("sim.tasks", self.tasks.into());
        put("sim.slots", self.slots.into());
        put("sim.stations", self.stations.into());
        put("sim.station_ratio", self.station_ratio.into());
        put("sim.station_capacity", self.station_capacity.into());
        put("sim.seed", self.seed.into());
        put(
            "sim.seeds",
            Value::Array(self.seeds.iter().map(|&s| s.into()).collect()),
        );
        put(
            "sim.class_mix",
            Value::Array(self.class_mix.iter().map(|&m| json_f64(m)).collect()),
        );
        put("sim.training_days", self.training_days.into());
        put("sim.stats_window", self.stats_window.into());
        put("sim.uav_fraction", json_f64(self.uav_fraction));
        put(
            "sim.displacement_scale_uav",
            json_f64(self.displacement_scale_uav),
        );
        put(
            "sim.displacement_scale_ugv",
            json_f64(self.displacement_scale_ugv),
        );
        put("sim.prune_epsilon", json_f64(self.prune_epsilon));
        put(
            "sim.sweep_nodes",
            Value::Array(self.sweep_nodes.iter().map(|&n| n.into()).collect()),
        );
        Value::Object(map)
    }
}

fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn parse_algorithms(v: &Value) -> Result<Vec<Algorithm>> {
    let names: Vec<String> = match v {
        Value::String(s) => s.split(',').map(|p| p.trim().to_string()).collect(),
        Value::Array(items) => items
            .iter()
            .map(|i| {
                i.as_str().map(str::to_string).ok_or_else(|| {
                    Error::InvalidConfig("sched.algorithm entries must be strings".into())
                })
            })
            .collect::<Result<_>>()?,
        _ => {
            return Err(Error::InvalidConfig(
                "sched.algorithm must be a string or array of strings".into(),
            ))
        }
    };
    names.iter().map(|n| n.parse()).collect()
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} must be a number")))
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    v.as_u64()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} must be a nonnegative integer")))
}

fn as_u32(key: &str, v: &Value) -> Result<u32> {
    let n = as_u64(key, v)?;
    u32::try_from(n).map_err(|_| Error::InvalidConfig(format!("{key} = {n} is out of range")))
}

fn as_i32(key: &str, v: &Value) -> Result<i32> {
    let n = v
        .as_i64()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} must be an integer")))?;
    i32::try_from(n).map_err(|_| Error::InvalidConfig(format!("{key} = {n} is out of range")))
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} must be a boolean")))
}

fn as_f64_array(key: &str, v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} must be an array")))?
        .iter()
        .map(|i| as_f64(key, i))
        .collect()
}

fn as_u64_array(key: &str, v: &Value) -> Result<Vec<u64>> {
    v.as_array()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} must be an array")))?
        .iter()
        .map(|i| as_u64(key, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn flat_keys_apply() {
        let v = json!({
            "grid.rows": 5,
            "sched.alpha": 0.6,
            "sched.beta": 0.4,
            "sched.algorithm": "mpbs,edf",
            "sim.seeds": [1, 2, 3],
        });
        let c = SimConfig::from_flat_json(&v).unwrap();
        assert_eq!(c.grid_rows, 5);
        assert_eq!(c.sched_alpha, 0.6);
        assert_eq!(c.algorithms, vec![Algorithm::Mpbs, Algorithm::Edf]);
        assert_eq!(c.seed_list(), vec![1, 2, 3]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let v = json!({ "grid.rowz": 5 });
        let err = SimConfig::from_flat_json(&v).unwrap_err();
        assert!(err.to_string().contains("grid.rowz"));
    }

    #[test]
    fn unknown_algorithm_lists_valid_names() {
        let v = json!({ "sched.algorithm": "fifo" });
        let err = SimConfig::from_flat_json(&v).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("fifo"));
        for name in ["mpbs", "greedy", "hsf", "edf", "lsf"] {
            assert!(msg.contains(name), "missing {name} in {msg}");
        }
    }

    #[test]
    fn mismatched_weights_are_rejected() {
        let v = json!({ "sched.alpha": 0.9 });
        assert!(SimConfig::from_flat_json(&v).is_err());
        let v = json!({ "sched.alpha": 0.9, "sched.beta": 0.1 });
        assert!(SimConfig::from_flat_json(&v).is_ok());
    }

    #[test]
    fn flat_json_roundtrip() {
        let mut c = SimConfig::default();
        c.devices = 60;
        c.seeds = vec![4, 5];
        c.algorithms = vec![Algorithm::Lsf, Algorithm::Mpbs];
        let back = SimConfig::from_flat_json(&c.to_flat_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn station_count_follows_ratio() {
        let mut c = SimConfig::default();
        c.devices = 60;
        assert_eq!(c.station_count(), 6);
        c.stations = 2;
        assert_eq!(c.station_count(), 2);
        c.stations = 0;
        c.devices = 5;
        assert_eq!(c.station_count(), 1);
    }
}
