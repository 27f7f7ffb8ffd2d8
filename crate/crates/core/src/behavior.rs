//! Trajectory features and mover-type classification.
//!
//! Each device is summarized by four features (visit frequency, location
//! entropy, average displacement, dwell time) and classified into one of four
//! mover types with a KNN model. Ground-truth labels are not available, so a
//! rule-based bootstrap generates the seed labels the KNN trains on.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::ingest::SlotTrace;
use crate::types::{DeviceId, Slot};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

/// The four behavior categories driving model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoverClass {
    /// Predictable, periodic movement.
    Regular,
    /// Partially structured but adaptive movement.
    SemiRegular,
    /// Low-range activity with few transitions.
    Localized,
    /// High entropy, no stable pattern.
    Random,
}

impl MoverClass {
    pub const ALL: [MoverClass; 4] = [
        MoverClass::Regular,
        MoverClass::SemiRegular,
        MoverClass::Localized,
        MoverClass::Random,
    ];

    /// Fixed tie-break rank: Regular < SemiRegular < Localized < Random.
    pub fn rank(self) -> usize {
        match self {
            MoverClass::Regular => 0,
            MoverClass::SemiRegular => 1,
            MoverClass::Localized => 2,
            MoverClass::Random => 3,
        }
    }
}

impl fmt::Display for MoverClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MoverClass::Regular => "regular",
            MoverClass::SemiRegular => "semi_regular",
            MoverClass::Localized => "localized",
            MoverClass::Random => "random",
        };
        f.write_str(s)
    }
}

impl FromStr for MoverClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(MoverClass::Regular),
            "semi_regular" => Ok(MoverClass::SemiRegular),
            "localized" => Ok(MoverClass::Localized),
            "random" => Ok(MoverClass::Random),
            other => Err(Error::InvalidConfig(format!(
                "unknown mover class '{other}'"
            ))),
        }
    }
}

/// Mobility features of one device. All components are nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Mean distinct regions visited per observed day.
    pub visit_frequency: f64,
    /// Shannon entropy of the empirical region distribution, in bits.
    pub location_entropy: f64,
    /// Mean grid-cell distance between consecutive slot entries.
    pub avg_displacement: f64,
    /// Mean length of maximal same-region runs, in slots.
    pub dwell_time: f64,
}

impl FeatureVector {
    pub fn to_array(self) -> [f64; 4] {
        [
            self.visit_frequency,
            self.location_entropy,
            self.avg_displacement,
            self.dwell_time,
        ]
    }
}

/// A device together with its features and assigned mover type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub device_id: DeviceId,
    pub features: FeatureVector,
    pub class: MoverClass,
}

/// Compute the feature vector of a slot trace.
pub fn extract_features(
    trace: &SlotTrace,
    grid: &GridSpec,
    slots_per_day: Slot,
) -> Result<FeatureVector> {
    if trace.entries.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "device {} has {} slot entries, need at least 2",
            trace.device_id,
            trace.entries.len()
        )));
    }

    let mut per_day: HashMap<Slot, BTreeSet<u32>> = HashMap::new();
    let mut region_counts: HashMap<u32, usize> = HashMap::new();
    for e in &trace.entries {
        per_day
            .entry(e.slot / slots_per_day)
            .or_default()
            .insert(e.region.0);
        *region_counts.entry(e.region.0).or_insert(0) += 1;
    }
    let visit_frequency =
        per_day.values().map(|s| s.len() as f64).sum::<f64>() / per_day.len() as f64;

    let total = trace.entries.len() as f64;
    let location_entropy = region_counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>();

    let avg_displacement = trace
        .entries
        .windows(2)
        .map(|w| grid.cell_distance(w[0].region, w[1].region))
        .sum::<f64>()
        / (trace.entries.len() - 1) as f64;

    let mut runs = 0usize;
    let mut current = None;
    for e in &trace.entries {
        if current != Some(e.region) {
            runs += 1;
            current = Some(e.region);
        }
    }
    let dwell_time = total / runs as f64;

    Ok(FeatureVector {
        visit_frequency,
        location_entropy,
        avg_displacement,
        dwell_time,
    })
}

/// Cutoffs for the rule-based seed labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelThresholds {
    /// Entropy below this marks periodic (Regular) movement, in bits.
    pub entropy_low: f64,
    /// Entropy above this marks Random movement, in bits.
    pub entropy_high: f64,
    /// Displacement below this (cells) is a Localized signal.
    pub displacement_low: f64,
    /// Dwell time above this (slots) is a Localized signal.
    pub dwell_high: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds {
            entropy_low: 1.5,
            entropy_high: 3.5,
            displacement_low: 0.5,
            dwell_high: 8.0,
        }
    }
}

/// Rule-based seed labels for the KNN training set.
///
/// Localized requires both low displacement and high dwell; Regular is low
/// entropy (concentrated, periodic visits); Random is high entropy; anything
/// else is SemiRegular.
pub fn bootstrap_labels(features: &[FeatureVector], t: &LabelThresholds) -> Vec<MoverClass> {
    features
        .iter()
        .map(|f| {
            if f.avg_displacement < t.displacement_low && f.dwell_time > t.dwell_high {
                MoverClass::Localized
            } else if f.location_entropy < t.entropy_low {
                MoverClass::Regular
            } else if f.location_entropy > t.entropy_high {
                MoverClass::Random
            } else {
                MoverClass::SemiRegular
            }
        })
        .collect()
}

/// Largest odd k that fits the training set, bounded by the configured k.
pub fn effective_k(configured: usize, training_size: usize) -> usize {
    let mut k = configured.min(training_size).max(1);
    if k % 2 == 0 {
        k -= 1;
    }
    k.max(1)
}

/// KNN over min-max normalized features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    mins: [f64; 4],
    maxs: [f64; 4],
    /// Training points, already normalized.
    points: Vec<([f64; 4], MoverClass)>,
}

impl KnnModel {
    /// Fit normalization bounds and store the training set. `k` must be odd,
    /// at least 1 and no larger than the training set.
    pub fn fit(training: &[(FeatureVector, MoverClass)], k: usize) -> Result<Self> {
        if k == 0 || k > training.len() {
            return Err(Error::InvalidConfig(format!(
                "knn.k = {k} must be in [1, {}]",
                training.len()
            )));
        }
        if k % 2 == 0 {
            return Err(Error::InvalidConfig(format!("knn.k = {k} must be odd")));
        }
        let mut mins = [f64::INFINITY; 4];
        let mut maxs = [f64::NEG_INFINITY; 4];
        for (f, _) in training {
            for (i, v) in f.to_array().iter().enumerate() {
                mins[i] = mins[i].min(*v);
                maxs[i] = maxs[i].max(*v);
            }
        }
        let points = training
            .iter()
            .map(|(f, c)| (normalize(f.to_array(), &mins, &maxs), *c))
            .collect();
        Ok(KnnModel {
            k,
            mins,
            maxs,
            points,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Classify a feature vector.
    ///
    /// Queries outside the training bounds are clamped into the unit range
    /// rather than rejected. Class-count ties break toward the smaller
    /// summed distance, residual ties toward the fixed class order.
    pub fn classify(&self, f: &FeatureVector) -> MoverClass {
        let q = normalize(f.to_array(), &self.mins, &self.maxs);
        let mut dists: Vec<(f64, MoverClass)> = self
            .points
            .iter()
            .map(|(p, c)| (euclidean(p, &q), *c))
            .collect();
        // Sorting by (distance, class rank) keeps neighbor selection
        // deterministic under training-set permutation even with ties.
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.rank().cmp(&b.1.rank())));

        let mut count = [0usize; 4];
        let mut dist_sum = [0.0f64; 4];
        for (d, c) in dists.iter().take(self.k) {
            count[c.rank()] += 1;
            dist_sum[c.rank()] += d;
        }
        MoverClass::ALL
            .iter()
            .copied()
            .max_by(|a, b| {
                count[a.rank()]
                    .cmp(&count[b.rank()])
                    .then(dist_sum[b.rank()].total_cmp(&dist_sum[a.rank()]))
                    .then(b.rank().cmp(&a.rank()))
            })
            .expect("class list is non-empty")
    }
}

fn normalize(v: [f64; 4], mins: &[f64; 4], maxs: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        let span = maxs[i] - mins[i];
        out[i] = if span > 0.0 {
            ((v[i] - mins[i]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    out
}

fn euclidean(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Write profiles as CSV; `name_of` maps device ids to their external names.
pub fn write_profiles_csv<W: Write>(
    mut w: W,
    profiles: &[BehaviorProfile],
    name_of: impl Fn(DeviceId) -> String,
) -> Result<()> {
    writeln!(
        w,
        "device_id,visit_frequency,entropy,avg_displacement,dwell_time,class"
    )?;
    for p in profiles {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{}",
            name_of(p.device_id),
            p.features.visit_frequency,
            p.features.location_entropy,
            p.features.avg_displacement,
            p.features.dwell_time,
            p.class
        )?;
    }
    Ok(())
}
