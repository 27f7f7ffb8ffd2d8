//! Evaluation metrics and their per-seed aggregation.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Metrics of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    /// Task completion rate: completed / total.
    pub tcr: f64,
    /// Average response time: mean slots from release to first assignment,
    /// over tasks that received at least one assignment.
    pub art: f64,
    /// Device utilization: mean per-slot fraction of assigned devices.
    pub du: f64,
    /// Successful recruits: sum of required devices over completed tasks.
    pub np: u64,
    /// Completion rate (same numerator/denominator as `tcr`).
    pub cr: f64,
    /// Average task time: mean slots from release to completion, over
    /// completed tasks.
    pub at: f64,
    pub completed: u32,
    pub expired: u32,
    pub total_tasks: u32,
    pub total_assignments: u64,
}

/// Mean and 95% confidence half-width across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub mean: f64,
    pub ci95_half: f64,
}

/// Per-seed values plus aggregates for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub algorithm: String,
    pub per_seed: Vec<SeedMetrics>,
    pub tcr: MetricAggregate,
    pub art: MetricAggregate,
    pub du: MetricAggregate,
    pub np: MetricAggregate,
    pub cr: MetricAggregate,
    pub at: MetricAggregate,
}

impl MetricsReport {
    pub fn aggregate(algorithm: String, per_seed: Vec<SeedMetrics>) -> MetricsReport {
        let agg = |f: &dyn Fn(&SeedMetrics) -> f64| -> MetricAggregate {
            let values: Vec<f64> = per_seed.iter().map(f).collect();
            MetricAggregate {
                mean: mean(&values),
                ci95_half: ci95_half(&values),
            }
        };
        MetricsReport {
            algorithm,
            tcr: agg(&|m| m.tcr),
            art: agg(&|m| m.art),
            du: agg(&|m| m.du),
            np: agg(&|m| m.np as f64),
            cr: agg(&|m| m.cr),
            at: agg(&|m| m.at),
            per_seed,
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Student-t 97.5% quantiles for df 1..=30; beyond that the normal 1.96.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn ci95_half(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
    let t = T_975.get(n - 2).copied().unwrap_or(1.96);
    t * var.sqrt() / (n as f64).sqrt()
}

/// One `metrics.csv` block: a row per seed, then `mean` and `ci95_half` rows.
pub fn write_metrics_csv<W: Write>(mut w: W, report: &MetricsReport) -> Result<()> {
    writeln!(w, "algorithm,seed,tcr,art,du,np,cr,at")?;
    for m in &report.per_seed {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6}",
            report.algorithm, m.seed, m.tcr, m.art, m.du, m.np, m.cr, m.at
        )?;
    }
    let rows: [(&str, fn(&MetricAggregate) -> f64); 2] =
        [("mean", |a| a.mean), ("ci95_half", |a| a.ci95_half)];
    for (label, pick) in rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            report.algorithm,
            label,
            pick(&report.tcr),
            pick(&report.art),
            pick(&report.du),
            pick(&report.np),
            pick(&report.cr),
            pick(&report.at)
        )?;
    }
    Ok(())
}
