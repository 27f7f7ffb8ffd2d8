//! Behavior-adaptive Markov mobility prediction.
//!
//! Transition structure is learned per day period for Regular movers
//! (first-order, one matrix per period), as a single second-order chain for
//! SemiRegular movers, a third-order chain for Random movers, and a per-device
//! dwell-time argmax for Localized movers. Unseen states degrade gracefully:
//! reduce the chain order, then the all-day first-order model, then uniform.

use crate::behavior::MoverClass;
use crate::error::{Error, Result};
use crate::grid::RegionId;
use crate::ingest::SlotTrace;
use crate::types::{DeviceId, Slot};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// The four fixed day periods of the time-varying model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DayPeriod {
    /// 0:00-7:00, low activity.
    Rest,
    /// 7:00-10:00, first transition peak.
    CommuteToWork,
    /// 10:00-17:00, moderate and stable.
    WorkHours,
    /// 17:00-24:00, second transition peak.
    CommuteHome,
}

impl DayPeriod {
    pub const ALL: [DayPeriod; 4] = [
        DayPeriod::Rest,
        DayPeriod::CommuteToWork,
        DayPeriod::WorkHours,
        DayPeriod::CommuteHome,
    ];

    pub fn index(self) -> usize {
        match self {
            DayPeriod::Rest => 0,
            DayPeriod::CommuteToWork => 1,
            DayPeriod::WorkHours => 2,
            DayPeriod::CommuteHome => 3,
        }
    }
}

/// Period containing a slot's local start time. Boundaries belong to the
/// later period, so 7:00 sharp is already CommuteToWork.
pub fn period_of(slot: Slot, slots_per_day: Slot) -> DayPeriod {
    debug_assert!(slots_per_day > 0 && 1440 % slots_per_day == 0);
    let minutes_per_slot = 1440 / slots_per_day;
    let minute = (slot % slots_per_day) * minutes_per_slot;
    match minute {
        0..=419 => DayPeriod::Rest,
        420..=599 => DayPeriod::CommuteToWork,
        600..=1019 => DayPeriod::WorkHours,
        _ => DayPeriod::CommuteHome,
    }
}

/// A chain state: 1 to 3 most recent regions packed into 16-bit lanes,
/// oldest in the highest lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateKey(u64);

impl StateKey {
    pub fn new(regions: &[RegionId]) -> StateKey {
        debug_assert!((1..=3).contains(&regions.len()));
        StateKey(regions.iter().fold(0u64, |k, r| {
            debug_assert!(r.0 <= u16::MAX as u32);
            (k << 16) | r.0 as u64
        }))
    }

    pub fn regions(self, order: u8) -> Vec<RegionId> {
        (0..order)
            .rev()
            .map(|i| RegionId(((self.0 >> (16 * i)) & 0xffff) as u32))
            .collect()
    }
}

/// Raw transition counts for one chain order and period scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub order: u8,
    /// `None` counts transitions from the whole day.
    pub period: Option<DayPeriod>,
    pub counts: BTreeMap<StateKey, BTreeMap<RegionId, u64>>,
}

/// Count every `order`-long window followed by its destination across all
/// traces. Gaps in slot index break the chain; with a period filter, a window
/// counts only when the destination slot falls in that period.
pub fn count_transitions(
    traces: &[SlotTrace],
    order: u8,
    period: Option<DayPeriod>,
    slots_per_day: Slot,
) -> TransitionCounts {
    assert!((1..=3).contains(&order), "order must be 1, 2 or 3");
    let mut counts: BTreeMap<StateKey, BTreeMap<RegionId, u64>> = BTreeMap::new();
    let n = order as usize;
    let mut buf = [RegionId(0); 3];
    for trace in traces {
        for run in consecutive_runs(trace) {
            if run.len() <= n {
                continue;
            }
            for w in run.windows(n + 1) {
                let dest = w[n];
                if let Some(p) = period {
                    if period_of(dest.slot, slots_per_day) != p {
                        continue;
                    }
                }
                for (i, e) in w[..n].iter().enumerate() {
                    buf[i] = e.region;
                }
                let state = StateKey::new(&buf[..n]);
                *counts
                    .entry(state)
                    .or_default()
                    .entry(dest.region)
                    .or_insert(0) += 1;
            }
        }
    }
    TransitionCounts {
        order,
        period,
        counts,
    }
}

fn consecutive_runs(trace: &SlotTrace) -> Vec<&[crate::ingest::SlotEntry]> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..trace.entries.len() {
        if trace.entries[i].slot != trace.entries[i - 1].slot + 1 {
            runs.push(&trace.entries[start..i]);
            start = i;
        }
    }
    if start < trace.entries.len() {
        runs.push(&trace.entries[start..]);
    }
    runs
}

/// Row-stochastic transition model over region states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRepr", try_from = "ModelRepr")]
pub struct TransitionModel {
    pub order: u8,
    pub period: Option<DayPeriod>,
    pub num_regions: u32,
    rows: BTreeMap<StateKey, Vec<f64>>,
}

impl TransitionModel {
    /// Probability row for a state, if the state was observed in training.
    pub fn row(&self, state: &[RegionId]) -> Option<&[f64]> {
        if state.len() != self.order as usize {
            return None;
        }
        self.rows.get(&StateKey::new(state)).map(|v| v.as_slice())
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = (&StateKey, &Vec<f64>)> {
        self.rows.iter()
    }
}

#[derive(Serialize, Deserialize, Clone)]
struct ModelRepr {
    order: u8,
    period: Option<DayPeriod>,
    num_regions: u32,
    rows: Vec<(Vec<u32>, Vec<f64>)>,
}

impl From<TransitionModel> for ModelRepr {
    fn from(m: TransitionModel) -> ModelRepr {
        ModelRepr {
            order: m.order,
            period: m.period,
            num_regions: m.num_regions,
            rows: m
                .rows
                .iter()
                .map(|(k, v)| (k.regions(m.order).iter().map(|r| r.0).collect(), v.clone()))
                .collect(),
        }
    }
}

impl TryFrom<ModelRepr> for TransitionModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<TransitionModel> {
        let mut rows = BTreeMap::new();
        for (state, probs) in r.rows {
            if state.len() != r.order as usize || probs.len() != r.num_regions as usize {
                return Err(Error::InvalidConfig(
                    "malformed transition model row".into(),
                ));
            }
            let key = StateKey::new(&state.into_iter().map(RegionId).collect::<Vec<_>>());
            rows.insert(key, probs);
        }
        Ok(TransitionModel {
            order: r.order,
            period: r.period,
            num_regions: r.num_regions,
            rows,
        })
    }
}

/// Turn counts into probabilities: `p(j|s) = (n_sj + a) / (n_s + a*R)` with
/// Laplace weight `a`. With `a = 0` this is the plain transition ratio and
/// only observed states get a row.
pub fn normalize(counts: &TransitionCounts, smoothing: f64, num_regions: u32) -> TransitionModel {
    let mut rows = BTreeMap::new();
    for (state, dests) in &counts.counts {
        let total: u64 = dests.values().sum();
        if total == 0 {
            continue;
        }
        let denom = total as f64 + smoothing * num_regions as f64;
        let mut row = vec![smoothing / denom; num_regions as usize];
        for (region, &n) in dests {
            row[region.index()] = (n as f64 + smoothing) / denom;
        }
        rows.insert(*state, row);
    }
    TransitionModel {
        order: counts.order,
        period: counts.period,
        num_regions,
        rows,
    }
}

/// Region with the greatest total occupied slots; ties go to the lower id.
pub fn dwell_argmax(trace: &SlotTrace) -> Result<RegionId> {
    if trace.entries.is_empty() {
        return Err(Error::InsufficientData(format!(
            "device {} has an empty trace",
            trace.device_id
        )));
    }
    let mut totals: BTreeMap<RegionId, u64> = BTreeMap::new();
    for e in &trace.entries {
        *totals.entry(e.region).or_insert(0) += 1;
    }
    Ok(totals
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&r, _)| r)
        .expect("non-empty totals"))
}

/// Probability distribution over all grid regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationDistribution {
    pub probs: Vec<f64>,
}

impl LocationDistribution {
    pub fn uniform(num_regions: u32) -> Self {
        let p = 1.0 / num_regions as f64;
        LocationDistribution {
            probs: vec![p; num_regions as usize],
        }
    }

    pub fn delta(num_regions: u32, region: RegionId) -> Self {
        let mut probs = vec![0.0; num_regions as usize];
        probs[region.index()] = 1.0;
        LocationDistribution { probs }
    }

    pub fn prob(&self, region: RegionId) -> f64 {
        self.probs[region.index()]
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Sample a region with one uniform draw via the inverse CDF.
    pub fn sample(&self, u: f64) -> RegionId {
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return RegionId(i as u32);
            }
        }
        RegionId(self.probs.len() as u32 - 1)
    }
}

/// Training knobs for the model bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub slots_per_day: Slot,
    pub num_regions: u32,
    pub smoothing: f64,
    /// Also train per-period second-order matrices for Regular movers.
    pub regular_second_order: bool,
    /// Allow the terminal uniform fallback; when off, a fully unseen state is
    /// an error instead.
    pub fallback_uniform: bool,
}

/// Every trained model needed to serve predictions for all four classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBank {
    pub config: TrainConfig,
    /// First-order models, one per day period, for Regular movers.
    pub regular: [TransitionModel; 4],
    /// Optional per-period second-order extension for Regular movers.
    pub regular_second: Option<[TransitionModel; 4]>,
    /// All-day second-order chain for SemiRegular movers.
    pub semi_regular: TransitionModel,
    /// All-day third-order chain for Random movers.
    pub random: TransitionModel,
    /// All-day first-order fallback.
    pub global: TransitionModel,
    /// Per-device dwell-argmax regions for Localized movers.
    pub dwell: BTreeMap<DeviceId, RegionId>,
}

/// Train the full bank from slot traces. The dwell table is keyed by each
/// trace's position in `traces`.
pub fn train_model_bank(traces: &[SlotTrace], config: TrainConfig) -> Result<ModelBank> {
    if config.slots_per_day == 0 || 1440 % config.slots_per_day != 0 {
        return Err(Error::InvalidConfig(format!(
            "slots_per_day {} must divide the day evenly",
            config.slots_per_day
        )));
    }
    let spd = config.slots_per_day;
    let r = config.num_regions;
    let s = config.smoothing;

    let per_period = |order: u8| -> [TransitionModel; 4] {
        DayPeriod::ALL.map(|p| normalize(&count_transitions(traces, order, Some(p), spd), s, r))
    };
    let all_day = |order: u8| -> TransitionModel {
        normalize(&count_transitions(traces, order, None, spd), s, r)
    };

    let mut dwell = BTreeMap::new();
    for (i, trace) in traces.iter().enumerate() {
        if let Ok(region) = dwell_argmax(trace) {
            dwell.insert(DeviceId(i as u32), region);
        }
    }

    Ok(ModelBank {
        config,
        regular: per_period(1),
        regular_second: config.regular_second_order.then(|| per_period(2)),
        semi_regular: all_day(2),
        random: all_day(3),
        global: all_day(1),
        dwell,
    })
}

impl ModelBank {
    /// Next-slot location distribution for one device.
    ///
    /// `slot` is the slot being predicted into (its period selects the matrix
    /// for Regular movers); `history` holds recent regions, most recent last.
    pub fn predict(
        &self,
        class: MoverClass,
        device: DeviceId,
        history: &[RegionId],
        slot: Slot,
    ) -> Result<LocationDistribution> {
        let r = self.config.num_regions;
        if class == MoverClass::Localized {
            if let Some(&region) = self.dwell.get(&device) {
                return Ok(LocationDistribution::delta(r, region));
            }
        }

        // Candidate lookups from most specific to least; the first stored row
        // wins, then the uniform terminal fallback.
        let period = period_of(slot, self.config.slots_per_day);
        let mut lookups: Vec<(&TransitionModel, usize)> = Vec::new();
        match class {
            MoverClass::Regular | MoverClass::Localized => {
                if let Some(second) = &self.regular_second {
                    lookups.push((&second[period.index()], 2));
                }
                lookups.push((&self.regular[period.index()], 1));
            }
            MoverClass::SemiRegular => {
                lookups.push((&self.semi_regular, 2));
            }
            MoverClass::Random => {
                lookups.push((&self.random, 3));
                lookups.push((&self.semi_regular, 2));
            }
        }
        lookups.push((&self.global, 1));

        for (model, order) in lookups {
            if history.len() < order {
                continue;
            }
            if let Some(row) = model.row(&history[history.len() - order..]) {
                return Ok(LocationDistribution {
                    probs: row.to_vec(),
                });
            }
        }
        if self.config.fallback_uniform {
            Ok(LocationDistribution::uniform(r))
        } else {
            Err(Error::InsufficientData(format!(
                "no trained state for device {device} and uniform fallback is disabled"
            )))
        }
    }

    /// Distribution several slots ahead. The first step uses the full
    /// class-specific dispatch; every further step propagates through the
    /// first-order matrix of the intervening slot's period (higher-order
    /// chains collapse to first order beyond one step).
    pub fn predict_multi(
        &self,
        class: MoverClass,
        device: DeviceId,
        history: &[RegionId],
        now: Slot,
        steps: u32,
    ) -> Result<LocationDistribution> {
        assert!(steps >= 1, "need at least one step");
        let mut dist = self.predict(class, device, history, now + 1)?;
        for k in 2..=steps {
            dist = self.propagate(&dist, now + k);
        }
        Ok(dist)
    }

    /// One first-order step: rows come from the slot period's matrix, falling
    /// back to the global matrix and then uniform per missing state.
    fn propagate(&self, dist: &LocationDistribution, slot: Slot) -> LocationDistribution {
        let r = self.config.num_regions as usize;
        let period_model = &self.regular[period_of(slot, self.config.slots_per_day).index()];
        let uniform = 1.0 / r as f64;
        let mut out = vec![0.0; r];
        for (i, &p) in dist.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let state = [RegionId(i as u32)];
            match period_model.row(&state).or_else(|| self.global.row(&state)) {
                Some(row) => {
                    for (j, &q) in row.iter().enumerate() {
                        out[j] += p * q;
                    }
                }
                None => {
                    for q in out.iter_mut() {
                        *q += p * uniform;
                    }
                }
            }
        }
        LocationDistribution { probs: out }
    }
}

/// Versioned bank container for on-disk storage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankFile {
    pub version: u32,
    pub bank: ModelBank,
}

pub const BANK_FILE_VERSION: u32 = 1;

pub fn save_bank(bank: &ModelBank) -> Result<String> {
    Ok(serde_json::to_string(&BankFile {
        version: BANK_FILE_VERSION,
        bank: bank.clone(),
    })?)
}

pub fn load_bank(data: &str) -> Result<ModelBank> {
    let file: BankFile = serde_json::from_str(data)?;
    if file.version != BANK_FILE_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported model bank version {}",
            file.version
        )));
    }
    Ok(file.bank)
}
