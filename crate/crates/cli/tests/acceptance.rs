//! Acceptance criterion 8: two `simulate` runs from the same manifest
//! produce byte-identical metrics files, verified by content hash.

use std::path::Path;
use std::process::Command;

fn agsched() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agsched"))
}

fn hash_file(path: &Path) -> u64 {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[test]
fn criterion_8_manifest_reruns_are_byte_identical() {
    let dir = std::env::temp_dir().join(format!("agsched-accept8-{}", std::process::id()));
    let first = dir.join("first");
    let second = dir.join("second");
    let _ = std::fs::remove_dir_all(&dir);

    let status = agsched()
        .args(["simulate", "--out"])
        .arg(&first)
        .args([
            "--set",
            "sim.devices=20",
            "--set",
            "sim.tasks=60",
            "--set",
            "sim.slots=48",
            "--set",
            "sim.stations=2",
            "--set",
            "sim.station_capacity=2",
            "--set",
            "sched.algorithm=\"mpbs,edf\"",
            "--seeds",
            "3,4,5",
        ])
        .status()
        .expect("simulate runs");
    assert!(status.success());

    let status = agsched()
        .args(["simulate", "--manifest"])
        .arg(first.join("manifest.json"))
        .arg("--out")
        .arg(&second)
        .status()
        .expect("manifest re-run works");
    assert!(status.success());

    for name in [
        "metrics_mpbs.csv",
        "metrics_edf.csv",
        "assignments.csv",
        "slot_timeline.csv",
        "comparison.csv",
    ] {
        let a = hash_file(&first.join(name));
        let b = hash_file(&second.join(name));
        assert_eq!(a, b, "{name} differs between manifest re-runs");
    }
    println!(
        "ACCEPTANCE 8 PASS: manifest re-run reproduced all five output files byte-identically"
    );
    let _ = std::fs::remove_dir_all(&dir);
}
