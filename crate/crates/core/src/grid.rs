//! Spatial discretization: a rectangular lat/lon grid of regions.
//!
//! The grid maps WGS-84 coordinates to flat region indices. Cells are
//! half-open except along the north and east edges, which are closed so the
//! bounding box is fully covered.

use crate::error::{Error, Result};
use crate::ingest::TrajectoryPoint;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of one grid region, row-major: `index = row * cols + col`.
///
/// Row 0 is the southern edge, column 0 the western edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A rectangular grid over a geographic bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
    pub rows: u32,
    pub cols: u32,
}

impl GridSpec {
    pub fn new(
        min_lat: f64,
        max_lat: f64,
        min_lon: f64,
        max_lon: f64,
        rows: u32,
        cols: u32,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig(
                "grid must have rows >= 1 and cols >= 1".into(),
            ));
        }
        if rows as u64 * cols as u64 > u16::MAX as u64 {
            return Err(Error::InvalidConfig(format!(
                "grid of {rows}x{cols} exceeds the supported {} regions",
                u16::MAX
            )));
        }
        if !(max_lat > min_lat) || !(max_lon > min_lon) {
            return Err(Error::DegenerateBox);
        }
        Ok(GridSpec {
            min_lat,
            max_lat,
            min_lon,
            max_lon,
            rows,
            cols,
        })
    }

    /// Total number of regions.
    pub fn num_regions(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn region_at(&self, row: u32, col: u32) -> RegionId {
        debug_assert!(row < self.rows && col < self.cols);
        RegionId(row * self.cols + col)
    }

    /// (row, col) of a region index.
    pub fn row_col(&self, region: RegionId) -> (u32, u32) {
        (region.0 / self.cols, region.0 % self.cols)
    }

    /// Euclidean distance between two region centers, in cell units.
    pub fn cell_distance(&self, a: RegionId, b: RegionId) -> f64 {
        let (ar, ac) = self.row_col(a);
        let (br, bc) = self.row_col(b);
        let dr = ar as f64 - br as f64;
        let dc = ac as f64 - bc as f64;
        (dr * dr + dc * dc).sqrt()
    }

    /// Region containing a point, or `None` when the point lies outside the
    /// bounding box. Points exactly on the max edge map to the last row/col.
    pub fn to_region(&self, p: &TrajectoryPoint) -> Option<RegionId> {
        if p.latitude < self.min_lat
            || p.latitude > self.max_lat
            || p.longitude < self.min_lon
            || p.longitude > self.max_lon
        {
            return None;
        }
        let cell_h = (self.max_lat - self.min_lat) / self.rows as f64;
        let cell_w = (self.max_lon - self.min_lon) / self.cols as f64;
        let row = (((p.latitude - self.min_lat) / cell_h).floor() as i64)
            .clamp(0, self.rows as i64 - 1) as u32;
        let col = (((p.longitude - self.min_lon) / cell_w).floor() as i64)
            .clamp(0, self.cols as i64 - 1) as u32;
        Some(self.region_at(row, col))
    }

    /// Latitude/longitude bounds of one cell (south, north, west, east).
    pub fn cell_bounds(&self, region: RegionId) -> (f64, f64, f64, f64) {
        let (row, col) = self.row_col(region);
        let cell_h = (self.max_lat - self.min_lat) / self.rows as f64;
        let cell_w = (self.max_lon - self.min_lon) / self.cols as f64;
        (
            self.min_lat + row as f64 * cell_h,
            self.min_lat + (row + 1) as f64 * cell_h,
            self.min_lon + col as f64 * cell_w,
            self.min_lon + (col + 1) as f64 * cell_w,
        )
    }
}

/// Fit a grid to observed points, trimming coordinate outliers.
///
/// The bounding box spans the `[trim_quantile, 1 - trim_quantile]` quantiles
/// of latitude and longitude independently, which keeps a handful of bad GPS
/// fixes from stretching the grid across half the globe.
pub fn fit_grid(
    points: &[TrajectoryPoint],
    rows: u32,
    cols: u32,
    trim_quantile: f64,
) -> Result<GridSpec> {
    if points.is_empty() {
        return Err(Error::InsufficientData(
            "fit_grid needs at least one point".into(),
        ));
    }
    if !(0.0..0.5).contains(&trim_quantile) {
        return Err(Error::InvalidConfig(format!(
            "trim_quantile {trim_quantile} outside [0, 0.5)"
        )));
    }
    let mut lats: Vec<f64> = points.iter().map(|p| p.latitude).collect();
    let mut lons: Vec<f64> = points.iter().map(|p| p.longitude).collect();
    lats.sort_by(f64::total_cmp);
    lons.sort_by(f64::total_cmp);
    let min_lat = quantile(&lats, trim_quantile);
    let max_lat = quantile(&lats, 1.0 - trim_quantile);
    let min_lon = quantile(&lons, trim_quantile);
    let max_lon = quantile(&lons, 1.0 - trim_quantile);
    if !(max_lat > min_lat) || !(max_lon > min_lon) {
        return Err(Error::DegenerateBox);
    }
    GridSpec::new(min_lat, max_lat, min_lon, max_lon, rows, cols)
}

/// Linear-interpolation quantile of a sorted slice.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}
