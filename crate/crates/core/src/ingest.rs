//! GeoLife PLT ingestion: raw GPS samples to per-slot region traces.
//!
//! A PLT file carries six header lines followed by CSV records of
//! `latitude,longitude,flag,altitude,fractional_days,date,time`. Only the
//! coordinates and the date/time pair are used. Each device (one GeoLife user
//! directory) becomes a [`SlotTrace`]: for every time slot in which the device
//! produced at least one in-bounds sample, the region it occupied for the
//! greatest accumulated time within that slot.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, RegionId};
use crate::types::Slot;
use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// One raw GPS sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    /// Degrees, WGS-84, in [-90, 90].
    pub latitude: f64,
    /// Degrees, in [-180, 180].
    pub longitude: f64,
    /// Seconds since the Unix epoch, as recorded (GeoLife stores GMT).
    pub timestamp: i64,
}

/// Result of parsing one PLT file.
#[derive(Debug, Clone, Default)]
pub struct PltParse {
    /// Points in file order; call [`sort_points`] before discretizing.
    pub points: Vec<TrajectoryPoint>,
    /// Number of malformed data lines that were skipped.
    pub skipped: usize,
}

const PLT_HEADER_LINES: usize = 6;

/// Parse one PLT file. Malformed data lines are skipped and counted; a file
/// too short to contain the six-line header is rejected outright.
pub fn parse_plt(raw: &[u8], origin: &str) -> Result<PltParse> {
    let text = String::from_utf8_lossy(raw);
    let mut lines = text.lines();
    for i in 0..PLT_HEADER_LINES {
        if lines.next().is_none() {
            return Err(Error::Parse {
                path: origin.to_string(),
                reason: format!("expected {PLT_HEADER_LINES} header lines, found {i}"),
            });
        }
    }
    let mut out = PltParse::default();
    for line in lines {
        match parse_plt_line(line) {
            Some(p) => out.points.push(p),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

fn parse_plt_line(line: &str) -> Option<TrajectoryPoint> {
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != 7 {
        return None;
    }
    let latitude: f64 = fields[0].trim().parse().ok()?;
    let longitude: f64 = fields[1].trim().parse().ok()?;
    if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
        return None;
    }
    // Fields 2..5 (flag, altitude, fractional days) are ignored.
    let stamp = format!("{} {}", fields[5].trim(), fields[6].trim());
    let when = NaiveDateTime::parse_from_str(&stamp, "%Y-%m-%d %H:%M:%S").ok()?;
    Some(TrajectoryPoint {
        latitude,
        longitude,
        timestamp: when.and_utc().timestamp(),
    })
}

/// Sort points by timestamp (stable, so file order breaks ties).
pub fn sort_points(points: &mut [TrajectoryPoint]) {
    points.sort_by_key(|p| p.timestamp);
}

/// One device's per-slot region sequence, strictly increasing in slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotTrace {
    pub device_id: String,
    pub entries: Vec<SlotEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub slot: Slot,
    pub region: RegionId,
}

impl SlotTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.entries.iter().map(|e| e.region)
    }
}

/// Discretize sorted points into a slot trace.
///
/// Each slot that contains at least one in-bounds sample gets the region the
/// device dwelt in longest within the slot (intervals run from each sample to
/// the next); out-of-bounds samples never vote, and slots with only
/// out-of-bounds samples are omitted. A slot whose accumulated dwell is zero
/// everywhere (e.g. a lone sample) falls back to a sample-count vote. Ties
/// break toward the lower region id.
pub fn to_slot_trace(
    device_id: &str,
    points: &[TrajectoryPoint],
    grid: &GridSpec,
    slot_minutes: u32,
    utc_offset_hours: i32,
) -> Result<SlotTrace> {
    if slot_minutes == 0 || 1440 % slot_minutes != 0 {
        return Err(Error::InvalidConfig(format!(
            "slot.minutes {slot_minutes} must divide 1440 evenly"
        )));
    }
    debug_assert!(points.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    let slot_secs = slot_minutes as i64 * 60;
    let offset_secs = utc_offset_hours as i64 * 3600;

    let mut dwell: BTreeMap<Slot, HashMap<RegionId, f64>> = BTreeMap::new();
    let mut samples: BTreeMap<Slot, HashMap<RegionId, u32>> = BTreeMap::new();

    for (i, p) in points.iter().enumerate() {
        let region = match grid.to_region(p) {
            Some(r) => r,
            None => continue,
        };
        let start = p.timestamp + offset_secs;
        if start < 0 {
            continue;
        }
        let slot = (start / slot_secs) as Slot;
        *samples.entry(slot).or_default().entry(region).or_insert(0) += 1;

        let end = points
            .get(i + 1)
            .map(|n| (n.timestamp + offset_secs).max(start))
            .unwrap_or(start);
        if end == start {
            continue;
        }
        let end_slot = ((end - 1) / slot_secs) as Slot;
        if end_slot == slot {
            *dwell.entry(slot).or_default().entry(region).or_insert(0.0) += (end - start) as f64;
        } else {
            // Only the first and last slots of the interval can ever emit an
            // entry: no sample exists strictly inside the interval.
            let first_part = (slot as i64 + 1) * slot_secs - start;
            *dwell.entry(slot).or_default().entry(region).or_insert(0.0) += first_part as f64;
            let last_part = end - end_slot as i64 * slot_secs;
            *dwell
                .entry(end_slot)
                .or_default()
                .entry(region)
                .or_insert(0.0) += last_part as f64;
        }
    }

    let entries = samples
        .iter()
        .map(|(&slot, counts)| {
            let by_dwell = dwell.get(&slot).and_then(|m| {
                if m.values().any(|&v| v > 0.0) {
                    m.iter()
                        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
                        .map(|(&r, _)| r)
                } else {
                    None
                }
            });
            let region = by_dwell.unwrap_or_else(|| {
                *counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                    .map(|(r, _)| r)
                    .expect("slot present implies at least one sample")
            });
            SlotEntry { slot, region }
        })
        .collect();

    Ok(SlotTrace {
        device_id: device_id.to_string(),
        entries,
    })
}

/// Per-device ingestion counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub files: usize,
    pub points: usize,
    pub skipped: usize,
}

/// Walk a GeoLife tree (`Data/<user_id>/Trajectory/*.plt`, or that layout
/// directly under `root`) and build one sorted point list per user.
pub fn read_geolife_dir(root: &Path) -> Result<Vec<(String, Vec<TrajectoryPoint>, IngestStats)>> {
    let data = root.join("Data");
    let base = if data.is_dir() {
        data
    } else {
        root.to_path_buf()
    };
    let mut users: Vec<String> = Vec::new();
    for entry in std::fs::read_dir(&base)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            users.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    users.sort();
    if users.is_empty() {
        return Err(Error::Parse {
            path: base.display().to_string(),
            reason: "no user directories found".into(),
        });
    }

    let mut out = Vec::with_capacity(users.len());
    for user in users {
        let traj_dir = base.join(&user).join("Trajectory");
        if !traj_dir.is_dir() {
            continue;
        }
        let mut files: Vec<_> = std::fs::read_dir(&traj_dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().map(|e| e == "plt").unwrap_or(false))
            .collect();
        files.sort();
        let mut points = Vec::new();
        let mut stats = IngestStats::default();
        for file in files {
            let raw = std::fs::read(&file)?;
            let parsed = parse_plt(&raw, &file.display().to_string())?;
            stats.files += 1;
            stats.points += parsed.points.len();
            stats.skipped += parsed.skipped;
            points.extend(parsed.points);
        }
        sort_points(&mut points);
        out.push((user, points, stats));
    }
    Ok(out)
}

/// Write traces as CSV with columns `device_id,slot,region`.
pub fn write_traces_csv<W: Write>(mut w: W, traces: &[SlotTrace]) -> Result<()> {
    writeln!(w, "device_id,slot,region")?;
    for trace in traces {
        for e in &trace.entries {
            writeln!(w, "{},{},{}", trace.device_id, e.slot, e.region)?;
        }
    }
    Ok(())
}

/// Read traces written by [`write_traces_csv`]; devices come back sorted by id.
pub fn read_traces_csv<R: std::io::Read>(r: R) -> Result<Vec<SlotTrace>> {
    let reader = BufReader::new(r);
    let mut by_device: BTreeMap<String, Vec<SlotEntry>> = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            continue;
        }
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (dev, slot, region) = (fields.next(), fields.next(), fields.next());
        let (dev, slot, region) = match (dev, slot, region, fields.next()) {
            (Some(d), Some(s), Some(r), None) => (d, s, r),
            _ => {
                return Err(Error::Parse {
                    path: "traces csv".into(),
                    reason: format!("line {}: expected device_id,slot,region", lineno + 1),
                })
            }
        };
        let slot: Slot = slot.trim().parse().map_err(|_| Error::Parse {
            path: "traces csv".into(),
            reason: format!("line {}: bad slot", lineno + 1),
        })?;
        let region: u32 = region.trim().parse().map_err(|_| Error::Parse {
            path: "traces csv".into(),
            reason: format!("line {}: bad region", lineno + 1),
        })?;
        by_device
            .entry(dev.to_string())
            .or_default()
            .push(SlotEntry {
                slot,
                region: RegionId(region),
            });
    }
    let mut traces = Vec::with_capacity(by_device.len());
    for (device_id, entries) in by_device {
        if entries.windows(2).any(|w| w[0].slot >= w[1].slot) {
            return Err(Error::Parse {
                path: "traces csv".into(),
                reason: format!("device {device_id}: slots not strictly increasing"),
            });
        }
        traces.push(SlotTrace { device_id, entries });
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n0,2,255,My Track,0,0,2,8421376\n0\n";

    fn grid() -> GridSpec {
        GridSpec::new(0.0, 1.0, 0.0, 1.0, 10, 10).unwrap()
    }

    #[test]
    fn parses_reference_line() {
        let file =
            format!("{HEADER}39.984702,116.318417,0,492,39744.1201851852,2008-10-23,02:53:04\n");
        let parsed = parse_plt(file.as_bytes(), "test").unwrap();
        assert_eq!(parsed.skipped, 0);
        assert_eq!(
            parsed.points,
            vec![TrajectoryPoint {
                latitude: 39.984702,
                longitude: 116.318417,
                timestamp: 1224730384, // 2008-10-23T02:53:04Z
            }]
        );
    }

    #[test]
    fn header_only_file_is_empty_not_error() {
        let parsed = parse_plt(HEADER.as_bytes(), "test").unwrap();
        assert!(parsed.points.is_empty());
        assert_eq!(parsed.skipped, 0);
    }

    #[test]
    fn truncated_header_is_file_error() {
        let err = parse_plt(b"only\nthree\nlines\n", "short.plt").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn malformed_line_is_skipped_and_counted() {
        let file = format!(
            "{HEADER}abc,116.3,0,0,0,2008-10-23,02:53:04\n39.9,116.3,0,0,0,2008-10-23,02:53:05\n"
        );
        let parsed = parse_plt(file.as_bytes(), "test").unwrap();
        assert_eq!(parsed.skipped, 1);
        assert_eq!(parsed.points.len(), 1);
    }

    #[test]
    fn crlf_and_trailing_whitespace_are_tolerated() {
        let file = format!(
            "{}0.55,0.55,0,0,0,2008-10-23,02:53:04  \r\n",
            HEADER.replace('\n', "\r\n")
        );
        let parsed = parse_plt(file.as_bytes(), "test").unwrap();
        assert_eq!(parsed.skipped, 0);
        assert_eq!(parsed.points.len(), 1);
    }

    #[test]
    fn line_accounting_is_exhaustive() {
        // 6 header lines + 3 good + 2 bad.
        let file = format!(
            "{HEADER}0.1,0.1,0,0,0,2008-10-23,02:00:00\nbad line\n0.2,0.2,0,0,0,2008-10-23,02:01:00\n999,0.3,0,0,0,2008-10-23,02:02:00\n0.3,0.3,0,0,0,2008-10-23,02:03:00\n"
        );
        let total_lines = file.lines().count();
        let parsed = parse_plt(file.as_bytes(), "test").unwrap();
        assert_eq!(parsed.points.len() + parsed.skipped + 6, total_lines);
    }

    fn pt(lat: f64, lon: f64, ts: i64) -> TrajectoryPoint {
        TrajectoryPoint {
            latitude: lat,
            longitude: lon,
            timestamp: ts,
        }
    }

    #[test]
    fn single_sample_slot_emits_its_region() {
        // Slot 3 under 15-minute slots and zero offset: [2700, 3600).
        let points = [pt(0.75, 0.05, 2700)];
        let trace = to_slot_trace("d", &points, &grid(), 15, 0).unwrap();
        // Region: row 7 (lat 0.75), col 0 -> id 70.
        assert_eq!(
            trace.entries,
            vec![SlotEntry {
                slot: 3,
                region: RegionId(70)
            }]
        );
    }

    #[test]
    fn majority_dwell_wins_the_slot() {
        // Slot 0 is [0, 900). Region A occupied [0, 600) = 10 min, region B
        // [600, 900) = 5 min (closed off by a point in the next slot).
        let points = [
            pt(0.05, 0.05, 0),   // region 0 (A)
            pt(0.05, 0.15, 600), // region 1 (B)
            pt(0.05, 0.15, 900), // next slot, ends B's interval
        ];
        let trace = to_slot_trace("d", &points, &grid(), 15, 0).unwrap();
        assert_eq!(
            trace.entries[0],
            SlotEntry {
                slot: 0,
                region: RegionId(0)
            }
        );
    }

    #[test]
    fn out_of_bounds_points_never_vote() {
        let points = [pt(5.0, 5.0, 0), pt(5.0, 5.0, 1000)];
        let trace = to_slot_trace("d", &points, &grid(), 15, 0).unwrap();
        assert!(trace.entries.is_empty());
    }

    #[test]
    fn slots_between_sparse_samples_are_omitted() {
        let points = [pt(0.05, 0.05, 0), pt(0.05, 0.05, 4000)];
        let trace = to_slot_trace("d", &points, &grid(), 15, 0).unwrap();
        let slots: Vec<Slot> = trace.entries.iter().map(|e| e.slot).collect();
        assert_eq!(slots, vec![0, 4]); // 4000 / 900 = 4; slots 1-3 omitted
    }

    #[test]
    fn utc_offset_shifts_slot_assignment() {
        let points = [pt(0.05, 0.05, 0)];
        let trace = to_slot_trace("d", &points, &grid(), 15, 8).unwrap();
        // 00:00 UTC = 08:00 local = slot 32 of the day.
        assert_eq!(trace.entries[0].slot, 32);
    }

    #[test]
    fn traces_csv_roundtrip() {
        let traces = vec![
            SlotTrace {
                device_id: "000".into(),
                entries: vec![
                    SlotEntry {
                        slot: 1,
                        region: RegionId(5),
                    },
                    SlotEntry {
                        slot: 4,
                        region: RegionId(9),
                    },
                ],
            },
            SlotTrace {
                device_id: "001".into(),
                entries: vec![SlotEntry {
                    slot: 2,
                    region: RegionId(0),
                }],
            },
        ];
        let mut buf = Vec::new();
        write_traces_csv(&mut buf, &traces).unwrap();
        let back = read_traces_csv(&buf[..]).unwrap();
        assert_eq!(back, traces);
    }
}
