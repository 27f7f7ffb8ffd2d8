//! Output-file helpers: atomic writes and the comparison table schema.

use agsched_core::metrics::MetricsReport;
use anyhow::{Context, Result};
use std::path::Path;

/// Write via a temp file in the same directory, then rename into place, so
/// partially written outputs never survive a crash.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming into place: {}", path.display()))?;
    Ok(())
}

pub const COMPARISON_HEADER: &str = "nodes,algorithm,tcr_mean,tcr_ci95,art_mean,art_ci95,du_mean,du_ci95,np_mean,np_ci95,cr_mean,cr_ci95,at_mean,at_ci95";

pub fn comparison_row(nodes: u32, report: &MetricsReport) -> String {
    format!(
        "{nodes},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        report.algorithm,
        report.tcr.mean,
        report.tcr.ci95_half,
        report.art.mean,
        report.art.ci95_half,
        report.du.mean,
        report.du.ci95_half,
        report.np.mean,
        report.np.ci95_half,
        report.cr.mean,
        report.cr.ci95_half,
        report.at.mean,
        report.at.ci95_half
    )
}
