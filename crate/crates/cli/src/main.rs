//! Command-line entry point for reproducible ingest/train/simulate runs.

mod manifest;
mod output;

use agsched_core::baselines::Algorithm;
use agsched_core::behavior::{
    bootstrap_labels, effective_k, extract_features, write_profiles_csv, BehaviorProfile, KnnModel,
    MoverClass,
};
use agsched_core::config::SimConfig;
use agsched_core::grid::GridSpec;
use agsched_core::ingest::{
    read_geolife_dir, read_traces_csv, to_slot_trace, write_traces_csv, SlotTrace,
};
use agsched_core::prediction::{save_bank, train_model_bank, TrainConfig};
use agsched_core::sim::{build_world, simulate_seed};
use agsched_core::types::DeviceId;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use manifest::{fingerprint, Manifest};
use output::{atomic_write, comparison_row, COMPARISON_HEADER};

const CONFIG_KEY_HELP: &str = "\
Config keys (flat JSON object in --config, or --set KEY=VALUE; defaults in parentheses):
  grid.rows (10)  grid.cols (10)  grid.trim_quantile (0.01)
  slot.minutes (15)  time.utc_offset_hours (8)
  knn.k (5)  labels.entropy_low (1.5)  labels.entropy_high (3.5)
  labels.displacement_low (0.5)  labels.dwell_high (8)
  markov.smoothing (0)  markov.regular_second_order (false)  markov.fallback_uniform (true)
  sched.alpha (0.8)  sched.beta (0.2)  sched.epsilon (1e-6)  sched.tau (0.1)
  sched.reliability_weights ([0.5,0.25,0.25])  sched.delay_scale (4)
  sched.algorithm (\"mpbs\"; any of mpbs,greedy,hsf,edf,lsf)
  sched.hsf_min_gain (0)  sched.lsf_service_estimate (1)
  sim.devices (300)  sim.tasks (1000)  sim.slots (96)
  sim.stations (0 = devices/station_ratio)  sim.station_ratio (10)  sim.station_capacity (5)
  sim.seed (42)  sim.seeds ([])  sim.class_mix ([0.25,0.25,0.25,0.25])
  sim.training_days (5)  sim.stats_window (32)  sim.uav_fraction (0.5)
  sim.displacement_scale_uav (1)  sim.displacement_scale_ugv (1)
  sim.prune_epsilon (0)  sim.sweep_nodes ([])
Precedence: command-line flags override config-file values override defaults.";

#[derive(Parser)]
#[command(
    name = "agsched",
    version,
    about = "Mobility-aware task recruitment and scheduling simulator",
    after_help = CONFIG_KEY_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a GeoLife tree into slot traces and a fitted grid.
    Ingest(IngestArgs),
    /// Train behavior profiles and the Markov model bank from slot traces.
    Train(TrainArgs),
    /// Run the configured scenario per algorithm and write metrics.
    Simulate(SimulateArgs),
    /// Replay a manifest and re-check every written assignment.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat key-value JSON config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig> {
        let mut config = SimConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            config.apply_flat_json(&value)?;
        }
        for pair in &self.set {
            let (key, raw) = pair
                .split_once('=')
                .with_context(|| format!("--set '{pair}' is not KEY=VALUE"))?;
            let value: serde_json::Value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            config.apply(key, &value)?;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct IngestArgs {
    /// GeoLife dataset root (`Data/<user>/Trajectory/*.plt`).
    #[arg(long, env = "AGSCHED_DATA_DIR", value_name = "DIR")]
    data: PathBuf,
    /// Output directory for traces.csv and grid.json.
    #[arg(long, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Slot traces CSV produced by `ingest`.
    #[arg(long, value_name = "PATH")]
    traces: PathBuf,
    /// Grid spec JSON; defaults to grid.json next to the traces file.
    #[arg(long, value_name = "PATH")]
    grid: Option<PathBuf>,
    /// Output directory for profiles.csv and model_bank.json.
    #[arg(long, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Re-run an existing manifest instead of loading a config.
    #[arg(long, value_name = "PATH", conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// Single seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated seed list override.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seeds: Vec<u64>,
    /// Run only this algorithm.
    #[arg(long)]
    algorithm: Option<String>,
    /// Parallel seed workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    /// Optional slot traces CSV: devices then follow real mobility data.
    #[arg(long, value_name = "PATH")]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Manifest of the run to validate.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Assignments CSV; defaults to assignments.csv next to the manifest.
    #[arg(long, value_name = "PATH")]
    assignments: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Train(args) => cmd_train(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let config = args.config.load()?;
    config.validate()?;
    let users = read_geolife_dir(&args.data)
        .with_context(|| format!("reading GeoLife tree {}", args.data.display()))?;

    let mut all_points = Vec::new();
    for (_, points, _) in &users {
        all_points.extend_from_slice(points);
    }
    if all_points.is_empty() {
        bail!("no trajectory points found under {}", args.data.display());
    }
    let grid = agsched_core::grid::fit_grid(
        &all_points,
        config.grid_rows,
        config.grid_cols,
        config.grid_trim_quantile,
    )?;

    let mut traces = Vec::new();
    let mut files = 0;
    let mut points_total = 0;
    let mut skipped_total = 0;
    for (user, points, stats) in &users {
        files += stats.files;
        points_total += stats.points;
        skipped_total += stats.skipped;
        let trace = to_slot_trace(
            user,
            points,
            &grid,
            config.slot_minutes,
            config.utc_offset_hours,
        )?;
        if !trace.is_empty() {
            traces.push(trace);
        }
    }

    std::fs::create_dir_all(&args.out)?;
    let mut buf = Vec::new();
    write_traces_csv(&mut buf, &traces)?;
    atomic_write(&args.out.join("traces.csv"), &buf)?;
    atomic_write(
        &args.out.join("grid.json"),
        serde_json::to_string_pretty(&grid)?.as_bytes(),
    )?;

    println!(
        "ingested {} files from {} users: {} points, {} lines skipped, {} traces written",
        files,
        users.len(),
        points_total,
        skipped_total,
        traces.len()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config = args.config.load()?;
    config.validate()?;
    let traces_text = std::fs::read_to_string(&args.traces)
        .with_context(|| format!("reading traces {}", args.traces.display()))?;
    let traces = read_traces_csv(traces_text.as_bytes())?;

    let grid_path = args
        .grid
        .clone()
        .unwrap_or_else(|| args.traces.with_file_name("grid.json"));
    let grid: GridSpec = if grid_path.is_file() {
        serde_json::from_str(&std::fs::read_to_string(&grid_path)?)
            .with_context(|| format!("parsing grid {}", grid_path.display()))?
    } else {
        GridSpec::new(0.0, 1.0, 0.0, 1.0, config.grid_rows, config.grid_cols)?
    };
    let spd = config.slots_per_day();

    // Devices whose traces are too short for features are dropped with a
    // warning; they cannot be classified or predicted.
    let mut usable: Vec<&SlotTrace> = Vec::new();
    for trace in &traces {
        if trace.entries.len() < 2 {
            eprintln!(
                "warning: device {} has {} slot entries, dropped",
                trace.device_id,
                trace.entries.len()
            );
        } else {
            usable.push(trace);
        }
    }
    if usable.is_empty() {
        bail!("no trace has enough entries to train on");
    }

    let features: Vec<_> = usable
        .iter()
        .map(|t| extract_features(t, &grid, spd))
        .collect::<agsched_core::Result<_>>()?;
    let seeds = bootstrap_labels(&features, &config.labels);
    let training: Vec<_> = features
        .iter()
        .copied()
        .zip(seeds.iter().copied())
        .collect();
    let k = effective_k(config.knn_k, training.len());
    let knn = KnnModel::fit(&training, k)?;
    let profiles: Vec<BehaviorProfile> = features
        .iter()
        .enumerate()
        .map(|(i, f)| BehaviorProfile {
            device_id: DeviceId(i as u32),
            features: *f,
            class: knn.classify(f),
        })
        .collect();

    let owned: Vec<SlotTrace> = usable.iter().map(|t| (*t).clone()).collect();
    let bank = train_model_bank(
        &owned,
        TrainConfig {
            slots_per_day: spd,
            num_regions: grid.num_regions(),
            smoothing: config.markov_smoothing,
            regular_second_order: config.markov_regular_second_order,
            fallback_uniform: config.markov_fallback_uniform,
        },
    )?;

    std::fs::create_dir_all(&args.out)?;
    let mut buf = Vec::new();
    write_profiles_csv(&mut buf, &profiles, |id| {
        usable[id.0 as usize].device_id.clone()
    })?;
    atomic_write(&args.out.join("profiles.csv"), &buf)?;
    atomic_write(
        &args.out.join("model_bank.json"),
        save_bank(&bank)?.as_bytes(),
    )?;

    let mut by_class: BTreeMap<MoverClass, usize> = BTreeMap::new();
    for p in &profiles {
        *by_class.entry(p.class).or_insert(0) += 1;
    }
    println!("trained on {} devices (k = {k})", profiles.len());
    for class in MoverClass::ALL {
        println!("  {class}: {}", by_class.get(&class).copied().unwrap_or(0));
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (mut config, traces_path) = match &args.manifest {
        Some(path) => {
            let manifest = Manifest::load(path)?;
            (
                SimConfig::from_flat_json(&manifest.config)?,
                manifest.traces_path.map(PathBuf::from),
            )
        }
        None => (args.config.load()?, args.traces.clone()),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.seeds = vec![seed];
    }
    if !args.seeds.is_empty() {
        config.seeds = args.seeds.clone();
    }
    if let Some(name) = &args.algorithm {
        config.algorithms = vec![name.parse::<Algorithm>()?];
    }
    config.validate()?;

    let traces: Option<Vec<SlotTrace>> = match &traces_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading traces {}", path.display()))?;
            Some(read_traces_csv(text.as_bytes())?)
        }
        None => None,
    };

    std::fs::create_dir_all(&args.out)?;
    let seeds = config.seed_list();

    let mut comparison = vec![COMPARISON_HEADER.to_string()];
    let mut assignments_csv = String::from("algorithm,seed,slot,task_id,device_id,station_id\n");
    let mut timeline_csv =
        String::from("algorithm,seed,slot,released,assignments,completed,expired,pending\n");
    let mut outputs: Vec<String> = Vec::new();

    if config.sweep_nodes.is_empty() {
        for &algorithm in &config.algorithms {
            let runs = run_seeds(&config, algorithm, &seeds, traces.as_deref(), args.jobs)?;
            let per_seed: Vec<_> = runs.iter().map(|(m, _)| *m).collect();
            let report =
                agsched_core::metrics::MetricsReport::aggregate(algorithm.to_string(), per_seed);

            let mut buf = Vec::new();
            agsched_core::metrics::write_metrics_csv(&mut buf, &report)?;
            let name = format!("metrics_{algorithm}.csv");
            atomic_write(&args.out.join(&name), &buf)?;
            outputs.push(name);
            comparison.push(comparison_row(total_nodes(&config), &report));

            for ((_, outcomes), &seed) in runs.iter().zip(&seeds) {
                for o in outcomes {
                    for a in &o.plan.assignments {
                        assignments_csv.push_str(&format!(
                            "{algorithm},{seed},{},{},{},{}\n",
                            o.slot, a.task, a.device, a.station
                        ));
                    }
                    timeline_csv.push_str(&format!(
                        "{algorithm},{seed},{},{},{},{},{},{}\n",
                        o.slot,
                        o.released.len(),
                        o.plan.len(),
                        o.completed.len(),
                        o.expired.len(),
                        o.pending_after
                    ));
                }
            }
            println!(
                "{algorithm}: tcr {:.4} +/- {:.4}, art {:.2}, du {:.4}, np {:.1}, cr {:.4}, at {:.2}",
                report.tcr.mean,
                report.tcr.ci95_half,
                report.art.mean,
                report.du.mean,
                report.np.mean,
                report.cr.mean,
                report.at.mean
            );
        }
        atomic_write(
            &args.out.join("assignments.csv"),
            assignments_csv.as_bytes(),
        )?;
        atomic_write(&args.out.join("slot_timeline.csv"), timeline_csv.as_bytes())?;
        outputs.push("assignments.csv".into());
        outputs.push("slot_timeline.csv".into());
    } else {
        // Node sweep: total node count splits into devices and stations at
        // the fixed 10-devices-per-station ratio.
        for &nodes in &config.sweep_nodes {
            let mut swept = config.clone();
            let stations = (nodes as f64 / 11.0).round().max(1.0) as u32;
            swept.stations = stations;
            swept.devices = nodes.saturating_sub(stations).max(1);
            swept.sweep_nodes = Vec::new();
            swept.validate()?;
            for &algorithm in &config.algorithms {
                let runs = run_seeds(&swept, algorithm, &seeds, traces.as_deref(), args.jobs)?;
                let per_seed: Vec<_> = runs.iter().map(|(m, _)| *m).collect();
                let report = agsched_core::metrics::MetricsReport::aggregate(
                    algorithm.to_string(),
                    per_seed,
                );
                comparison.push(comparison_row(nodes, &report));
                println!(
                    "nodes {nodes} {algorithm}: tcr {:.4}, cr {:.4}, np {:.1}, at {:.2}",
                    report.tcr.mean, report.cr.mean, report.np.mean, report.at.mean
                );
            }
        }
    }

    atomic_write(
        &args.out.join("comparison.csv"),
        (comparison.join("\n") + "\n").as_bytes(),
    )?;
    outputs.push("comparison.csv".into());

    let manifest = Manifest {
        tool: "agsched".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.to_flat_json(),
        dataset_fingerprint: fingerprint(&config, traces_path.as_deref())?,
        seeds: seeds.clone(),
        algorithms: config.algorithms.iter().map(|a| a.to_string()).collect(),
        traces_path: traces_path.map(|p| p.display().to_string()),
        outputs,
    };
    atomic_write(
        &args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(())
}

fn total_nodes(config: &SimConfig) -> u32 {
    config.devices + config.station_count()
}

type SeedRun = (
    agsched_core::metrics::SeedMetrics,
    Vec<agsched_core::sim::SlotOutcome>,
);

/// Run all seeds, optionally in parallel; results come back in seed order
/// regardless of worker count.
fn run_seeds(
    config: &SimConfig,
    algorithm: Algorithm,
    seeds: &[u64],
    traces: Option<&[SlotTrace]>,
    jobs: usize,
) -> Result<Vec<SeedRun>> {
    let jobs = jobs.max(1).min(seeds.len().max(1));
    if jobs <= 1 {
        return seeds
            .iter()
            .map(|&seed| Ok(simulate_seed(config, algorithm, seed, traces)?))
            .collect();
    }
    let mut results: Vec<Option<agsched_core::Result<SeedRun>>> = Vec::new();
    results.resize_with(seeds.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let cells = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let result = simulate_seed(config, algorithm, seeds[i], traces);
                cells.lock().expect("worker poisoned the results")[i] = Some(result);
            });
        }
    });
    results
        .into_iter()
        .map(|r| Ok(r.expect("every seed ran")?))
        .collect()
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let config = SimConfig::from_flat_json(&manifest.config)?;
    let traces: Option<Vec<SlotTrace>> = match &manifest.traces_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(read_traces_csv(text.as_bytes())?)
        }
        None => None,
    };
    let assignments_path = args
        .assignments
        .unwrap_or_else(|| args.manifest.with_file_name("assignments.csv"));
    let saved = read_assignments(&assignments_path)?;

    let mut violations = 0usize;
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for name in &manifest.algorithms {
        let algorithm: Algorithm = name.parse()?;
        for &seed in &manifest.seeds {
            let mut world = build_world(&config, seed, traces.as_deref())?;
            for slot in 0..config.slots {
                // Every step re-validates its plan against the snapshot it
                // scheduled from; replaying the seeded run re-checks the
                // whole file.
                let outcome = world.step(slot, algorithm)?;
                violations += outcome.violations.len();
                for v in &outcome.violations {
                    eprintln!("violation [{name} seed {seed} slot {slot}]: {v:?}");
                }
                let key = (name.clone(), seed, slot);
                let expected = saved.get(&key).cloned().unwrap_or_default();
                let actual: Vec<(u32, u32, u32)> = outcome
                    .plan
                    .assignments
                    .iter()
                    .map(|a| (a.task.0, a.device.0, a.station.0))
                    .collect();
                checked += actual.len();
                if expected != actual {
                    mismatches += 1;
                    eprintln!(
                        "mismatch [{name} seed {seed} slot {slot}]: {} saved vs {} replayed",
                        expected.len(),
                        actual.len()
                    );
                }
            }
        }
    }
    println!(
        "validated {checked} assignments: {violations} constraint violations, {mismatches} replay mismatches"
    );
    if violations > 0 || mismatches > 0 {
        bail!("validation failed");
    }
    Ok(())
}

type SavedPlans = BTreeMap<(String, u64, u32), Vec<(u32, u32, u32)>>;

fn read_assignments(path: &Path) -> Result<SavedPlans> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading assignments {}", path.display()))?;
    let mut saved: SavedPlans = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            bail!("assignments line {} malformed: {line}", i + 1);
        }
        let key = (parts[0].to_string(), parts[1].parse()?, parts[2].parse()?);
        saved.entry(key).or_default().push((
            parts[3].parse()?,
            parts[4].parse()?,
            parts[5].parse()?,
        ));
    }
    Ok(saved)
}
