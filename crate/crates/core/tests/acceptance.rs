//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (`--nocapture` to see them).

mod common;

use agsched_core::baselines::{
    edf_task_order, schedule_edf, schedule_greedy, schedule_hsf, schedule_lsf, Algorithm,
};
use agsched_core::behavior::{FeatureVector, KnnModel, MoverClass};
use agsched_core::config::SimConfig;
use agsched_core::grid::{GridSpec, RegionId};
use agsched_core::ingest::{read_geolife_dir, to_slot_trace, SlotEntry};
use agsched_core::prediction::{count_transitions, train_model_bank, DayPeriod, TrainConfig};
use agsched_core::recruitment::{estimate, estimate_pruned, DeviceForecast};
use agsched_core::scheduler::{
    build_candidates, mpbs_task_order, schedule_mpbs, validate_plan, PlanContext, SchedConfig,
};
use agsched_core::sim::run_scenario_with;
use agsched_core::types::{DeviceId, Slot, TaskId};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use std::collections::BTreeMap;
use std::time::Instant;

/// Criterion 1: across >= 10,000 fuzzed instances (up to 50 tasks, 100
/// devices, 8 stations), every plan from MPBS and all four baselines passes
/// the independent validator with zero violations, in under a minute.
#[test]
fn criterion_1_constraint_feasibility_fuzz() {
    const INSTANCES: usize = 10_000;
    let started = Instant::now();
    let mut rng = Pcg64::seed_from_u64(0xFEA51B1E);
    let mut plans_checked = 0usize;
    for i in 0..INSTANCES {
        let inst = common::random_instance(&mut rng, 50, 100, 8);
        let candidates = build_candidates(&inst.tasks, &inst.forecasts, inst.tau);
        let ctx = PlanContext {
            tasks: &inst.tasks,
            stations: &inst.stations,
            candidates: &candidates,
        };
        let cost: BTreeMap<DeviceId, f64> =
            inst.forecasts.iter().map(|f| (f.device, 1.0)).collect();
        let plans = [
            schedule_mpbs(
                &inst.tasks,
                &candidates,
                &inst.stations,
                inst.now,
                &inst.cfg,
            )
            .expect("mpbs schedules"),
            schedule_greedy(&inst.tasks, &candidates, &inst.stations, inst.now),
            schedule_hsf(
                &inst.tasks,
                &candidates,
                &inst.stations,
                inst.now,
                &cost,
                0.0,
            )
            .expect("hsf schedules"),
            schedule_edf(&inst.tasks, &candidates, &inst.stations, inst.now),
            schedule_lsf(&inst.tasks, &candidates, &inst.stations, inst.now, 1),
        ];
        for plan in &plans {
            let violations = validate_plan(plan, &ctx);
            assert!(violations.is_empty(), "instance {i}: {violations:?}");
            plans_checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "feasibility fuzz took {elapsed:?}, budget is one minute"
    );
    println!(
        "ACCEPTANCE 1 PASS: {plans_checked} plans over {INSTANCES} fuzzed instances, \
         0 violations, {elapsed:?}"
    );
}

/// Criterion 2: on 1,000 random instances (n <= 50 tasks, m <= 200 devices),
/// `estimate` matches an independently written double-loop oracle within
/// 1e-12 per task, and `estimate_pruned` deviates by at most epsilon * m.
#[test]
fn criterion_2_estimation_oracle_equivalence() {
    let mut rng = Pcg64::seed_from_u64(0x02AC1E);
    let mut max_err = 0.0f64;
    for _ in 0..1_000 {
        let inst = common::random_instance(&mut rng, 50, 200, 4);
        let results = estimate(&inst.tasks, &inst.forecasts).unwrap();

        // Oracle: device-major accumulation, written against the raw
        // definition rather than the library's task-major loop.
        let mut oracle = vec![0.0f64; inst.tasks.len()];
        for forecast in &inst.forecasts {
            for (slot, task) in oracle.iter_mut().zip(&inst.tasks) {
                *slot +=
                    forecast.distribution.probs[task.location.0 as usize] * forecast.reliability;
            }
        }
        for (r, expected) in results.iter().zip(&oracle) {
            let err = (r.expectation - expected).abs();
            max_err = max_err.max(err);
            assert!(err < 1e-12, "estimate off by {err}");
        }

        let epsilon = rng.gen_range(0.0..0.05);
        let m = inst.forecasts.len() as f64;
        let pruned = estimate_pruned(&inst.tasks, &inst.forecasts, epsilon).unwrap();
        for (p, full) in pruned.iter().zip(&results) {
            let gap = full.expectation - p.expectation;
            assert!(
                (0.0..=epsilon * m + 1e-12).contains(&gap),
                "pruning gap {gap} exceeds epsilon*m = {}",
                epsilon * m
            );
        }
        let exact = estimate_pruned(&inst.tasks, &inst.forecasts, 0.0).unwrap();
        for (a, b) in exact.iter().zip(&results) {
            assert_eq!(a.expectation, b.expectation);
        }
    }
    println!("ACCEPTANCE 2 PASS: 1000 instances, max |estimate - oracle| = {max_err:.3e}");
}

/// Criterion 3: every trained row of every order and period sums to 1 within
/// 1e-9; per-period first-order counts sum exactly to the all-day counts;
/// deterministic cycles predict with probability 1.
#[test]
fn criterion_3_markov_well_formedness() {
    let mut rng = Pcg64::seed_from_u64(0x3A11CE);
    let mut rows_checked = 0usize;
    for _ in 0..40 {
        let len = rng.gen_range(50..800);
        let traces: Vec<_> = (0..rng.gen_range(1..6))
            .map(|d| agsched_core::ingest::SlotTrace {
                device_id: format!("d{d}"),
                entries: (0..len)
                    .map(|i| SlotEntry {
                        slot: i as Slot,
                        region: RegionId(rng.gen_range(0..100)),
                    })
                    .collect(),
            })
            .collect();
        let smoothing = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..2.0)
        };
        let bank = train_model_bank(
            &traces,
            TrainConfig {
                slots_per_day: 96,
                num_regions: 100,
                smoothing,
                regular_second_order: true,
                fallback_uniform: true,
            },
        )
        .unwrap();

        let mut models: Vec<&agsched_core::prediction::TransitionModel> =
            vec![&bank.semi_regular, &bank.random, &bank.global];
        models.extend(bank.regular.iter());
        if let Some(second) = &bank.regular_second {
            models.extend(second.iter());
        }
        for model in models {
            for (_, row) in model.iter_rows() {
                let sum: f64 = row.iter().sum();
                assert!(
                    (sum - 1.0).abs() < 1e-9,
                    "order {} period {:?}: row sums to {sum}",
                    model.order,
                    model.period
                );
                rows_checked += 1;
            }
        }

        // Exact partition of counts by destination period.
        let all = count_transitions(&traces, 1, None, 96);
        let mut merged = all.counts.clone();
        for dests in merged.values_mut() {
            for c in dests.values_mut() {
                *c = 0;
            }
        }
        for p in DayPeriod::ALL {
            for (state, dests) in count_transitions(&traces, 1, Some(p), 96).counts {
                for (region, n) in dests {
                    *merged.get_mut(&state).unwrap().get_mut(&region).unwrap() += n;
                }
            }
        }
        assert_eq!(merged, all.counts);
    }

    // A deterministic, period-locked cycle must predict its successor with
    // probability exactly 1 under every chain order.
    let cycle = [3u32, 14, 15, 9, 2, 6, 31, 77];
    let regions: Vec<u32> = (0..(96 * 8)).map(|i| cycle[i % cycle.len()]).collect();
    let trace = agsched_core::ingest::SlotTrace {
        device_id: "cycle".into(),
        entries: regions
            .iter()
            .enumerate()
            .map(|(i, &r)| SlotEntry {
                slot: i as Slot,
                region: RegionId(r),
            })
            .collect(),
    };
    let bank = train_model_bank(
        &[trace],
        TrainConfig {
            slots_per_day: 96,
            num_regions: 100,
            smoothing: 0.0,
            regular_second_order: false,
            fallback_uniform: true,
        },
    )
    .unwrap();
    for i in 3..(96 * 8 - 1) {
        let history: Vec<RegionId> = (i - 2..=i)
            .map(|j| RegionId(cycle[j % cycle.len()]))
            .collect();
        for class in [
            MoverClass::Regular,
            MoverClass::SemiRegular,
            MoverClass::Random,
        ] {
            let d = bank
                .predict(class, DeviceId(0), &history, (i + 1) as Slot)
                .unwrap();
            assert_eq!(
                d.prob(RegionId(cycle[(i + 1) % cycle.len()])),
                1.0,
                "{class:?} at step {i}"
            );
        }
    }
    println!("ACCEPTANCE 3 PASS: {rows_checked} stochastic rows, exact period partition, probability-1 cycles");
}

/// Criterion 4: with alpha = 1, the MPBS service order equals EDF's on 1,000
/// random pending sets, tie-breaks aligned.
#[test]
fn criterion_4_edf_degeneracy() {
    let mut rng = Pcg64::seed_from_u64(0xEDF);
    let cfg = SchedConfig {
        alpha: 1.0,
        beta: 0.0,
        epsilon: 1e-6,
    };
    for i in 0..1_000 {
        let inst = common::random_instance(&mut rng, 50, 10, 8);
        let mpbs = mpbs_task_order(&inst.tasks, &inst.stations, inst.now, &cfg).unwrap();
        let edf = edf_task_order(&inst.tasks);
        assert_eq!(mpbs, edf, "orders diverged on instance {i}");
    }
    println!("ACCEPTANCE 4 PASS: alpha=1 service order == EDF on 1000 pending sets");
}

/// Criterion 5: measured wall time of `estimate` doubles (within +/-30%)
/// when either the task or the device dimension doubles, supporting the
/// O(n x m) claim.
#[test]
fn criterion_5_estimation_complexity_scaling() {
    let mut rng = Pcg64::seed_from_u64(0x5CA1E);
    let make_tasks = |n: u32| -> Vec<agsched_core::scheduler::Task> {
        (0..n)
            .map(|i| agsched_core::scheduler::Task {
                id: TaskId(i),
                location: RegionId(i % 100),
                required: 1 + i % 5,
                release: 0,
                deadline: 16,
                home_station: agsched_core::types::StationId(0),
            })
            .collect()
    };
    let forecasts: Vec<DeviceForecast> = (0..1000)
        .map(|i| DeviceForecast {
            device: DeviceId(i),
            distribution: common::random_distribution(&mut rng),
            reliability: 0.5,
        })
        .collect();

    // Interleave the three problem sizes within each repetition so clock
    // drift and cache warming hit all of them equally, then take medians.
    let shapes: [(u32, usize); 3] = [(250, 500), (500, 500), (500, 1000)];
    let tasks: Vec<Vec<agsched_core::scheduler::Task>> =
        shapes.iter().map(|&(n, _)| make_tasks(n)).collect();
    for (t, &(_, m)) in tasks.iter().zip(&shapes) {
        for _ in 0..3 {
            estimate(t, &forecasts[..m]).unwrap();
        }
    }
    let mut samples: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..15 {
        for (i, &(_, m)) in shapes.iter().enumerate() {
            let devices = &forecasts[..m];
            let t = Instant::now();
            std::hint::black_box(estimate(&tasks[i], std::hint::black_box(devices)).unwrap());
            samples[i].push(t.elapsed().as_secs_f64());
        }
    }
    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let [t_small, t_tasks_doubled, t_devices_doubled] = samples.map(median);
    let ratio_n = t_tasks_doubled / t_small;
    let ratio_m = t_devices_doubled / t_tasks_doubled;
    for (label, ratio) in [("tasks", ratio_n), ("devices", ratio_m)] {
        assert!(
            (1.4..=2.6).contains(&ratio),
            "doubling {label} scaled time by {ratio:.2}, expected 2.0 +/- 30%"
        );
    }
    println!(
        "ACCEPTANCE 5 PASS: (250,500) {:.3}ms -> (500,500) {:.3}ms -> (500,1000) {:.3}ms; \
         ratios {ratio_n:.2} / {ratio_m:.2} within [1.4, 2.6]",
        t_small * 1e3,
        t_tasks_doubled * 1e3,
        t_devices_doubled * 1e3
    );
}

/// Criterion 6: desk-scale comparison on a 10x10 grid, 96 slots, 60 devices,
/// 200 tasks, 10 seeds, with binding station capacity: mean completion rate
/// of MPBS is at least that of LSF and of EDF. The originally reported
/// above-97% completion rate is not reproducible from the published setup;
/// it is printed alongside for reference without gating.
#[test]
fn criterion_6_desk_scale_completion_ordering() {
    let started = Instant::now();
    let mut config = SimConfig::default();
    config.devices = 60;
    config.tasks = 200;
    config.slots = 96;
    config.stations = 2;
    config.station_capacity = 2;
    config.seeds = (1..=10).collect();

    let mpbs = run_scenario_with(&config, Algorithm::Mpbs, None).unwrap();
    let edf = run_scenario_with(&config, Algorithm::Edf, None).unwrap();
    let lsf = run_scenario_with(&config, Algorithm::Lsf, None).unwrap();

    assert!(
        mpbs.cr.mean >= lsf.cr.mean,
        "MPBS CR {:.4} < LSF CR {:.4}",
        mpbs.cr.mean,
        lsf.cr.mean
    );
    assert!(
        mpbs.cr.mean >= edf.cr.mean,
        "MPBS CR {:.4} < EDF CR {:.4}",
        mpbs.cr.mean,
        edf.cr.mean
    );
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "desk-scale run took {elapsed:?}, budget 5 minutes"
    );
    println!(
        "ACCEPTANCE 6 PASS: CR mpbs {:.4} >= lsf {:.4} and >= edf {:.4} ({elapsed:?}); \
         reference: the original evaluation reports above-97% completion under its own \
         (unpublished) generator settings",
        mpbs.cr.mean, lsf.cr.mean, edf.cr.mean
    );
}

/// Criterion 7: >= 90% holdout accuracy on a synthetic 4-cluster labeled
/// set, and exact tie-break determinism under training-set permutation. The
/// originally reported 95.55% accuracy is against unpublished labels and is
/// not reproducible.
#[test]
fn criterion_7_knn_cluster_accuracy_and_determinism() {
    let mut rng = Pcg64::seed_from_u64(0xC1A55);
    let mut gauss = |mean: f64, std: f64| -> f64 {
        // Box-Muller; one draw per call keeps the stream simple.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        mean + std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    // Cluster centers in (visit_frequency, entropy, displacement, dwell).
    let centers = [
        (MoverClass::Regular, [2.5, 1.0, 1.2, 4.0]),
        (MoverClass::SemiRegular, [4.5, 2.6, 2.2, 2.0]),
        (MoverClass::Localized, [1.2, 0.4, 0.2, 12.0]),
        (MoverClass::Random, [7.5, 5.2, 3.4, 1.1]),
    ];
    let sample = |g: &mut dyn FnMut(f64, f64) -> f64, c: &[f64; 4]| FeatureVector {
        visit_frequency: g(c[0], 0.35).max(0.0),
        location_entropy: g(c[1], 0.25).max(0.0),
        avg_displacement: g(c[2], 0.25).max(0.0),
        dwell_time: g(c[3], 0.6).max(0.0),
    };

    let mut training = Vec::new();
    let mut holdout = Vec::new();
    for (class, center) in &centers {
        for _ in 0..60 {
            training.push((sample(&mut gauss, center), *class));
        }
        for _ in 0..40 {
            holdout.push((sample(&mut gauss, center), *class));
        }
    }
    let model = KnnModel::fit(&training, 5).unwrap();
    let correct = holdout
        .iter()
        .filter(|(f, c)| model.classify(f) == *c)
        .count();
    let accuracy = correct as f64 / holdout.len() as f64;
    assert!(accuracy >= 0.9, "holdout accuracy {accuracy:.3} below 0.9");

    // Exact ties: four equidistant training points around a query, one per
    // class. The documented tie-break must give the same answer under every
    // rotation of the training set.
    let tie_query = FeatureVector {
        visit_frequency: 0.5,
        location_entropy: 0.5,
        avg_displacement: 0.5,
        dwell_time: 0.5,
    };
    let mut tie_training: Vec<(FeatureVector, MoverClass)> = MoverClass::ALL
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let mut v = [0.5f64; 4];
            v[i] = 1.0; // distance 0.5 from the query along one axis each
            (
                FeatureVector {
                    visit_frequency: v[0],
                    location_entropy: v[1],
                    avg_displacement: v[2],
                    dwell_time: v[3],
                },
                class,
            )
        })
        .collect();
    let mut answers = Vec::new();
    for _ in 0..tie_training.len() {
        tie_training.rotate_left(1);
        let m = KnnModel::fit(&tie_training, 3).unwrap();
        answers.push(m.classify(&tie_query));
    }
    assert!(
        answers.windows(2).all(|w| w[0] == w[1]),
        "tie-break depends on training order: {answers:?}"
    );
    assert_eq!(
        answers[0],
        MoverClass::Regular,
        "fixed class order breaks residual ties"
    );
    println!(
        "ACCEPTANCE 7 PASS: holdout accuracy {accuracy:.3} >= 0.9; tie-breaks stable under \
         permutation; reference: originally reported 95.55% is against unpublished labels"
    );
}

/// Criterion 9: parsed point counts, skipped-line counts and slot-trace
/// contents on the checked-in 3-file sample match hand-verified fixtures
/// exactly.
#[test]
fn criterion_9_ingestion_fidelity_fixtures() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/geolife");
    let users = read_geolife_dir(&root).unwrap();
    assert_eq!(users.len(), 2);

    let (id0, points0, stats0) = &users[0];
    assert_eq!(id0, "000");
    assert_eq!((stats0.files, stats0.points, stats0.skipped), (2, 6, 1));
    assert_eq!(points0.len(), 6);
    assert_eq!(points0[0].timestamp, 1224730384); // 2008-10-23T02:53:04Z

    let (id1, points1, stats1) = &users[1];
    assert_eq!(id1, "001");
    assert_eq!((stats1.files, stats1.points, stats1.skipped), (1, 3, 0));

    // Fixed reference grid over the sample area, 15-minute slots, UTC+8.
    let grid = GridSpec::new(39.9, 40.0, 116.3, 116.4, 10, 10).unwrap();
    let trace0 = to_slot_trace(id0, points0, &grid, 15, 8).unwrap();
    assert_eq!(
        trace0.entries,
        vec![
            // 02:53 UTC = 10:53 local: 416s in region 81 beats nothing else.
            SlotEntry {
                slot: 1_360_843,
                region: RegionId(81)
            },
            // 04:00 UTC = 12:00 local, exact slot start, region 73.
            SlotEntry {
                slot: 1_360_848,
                region: RegionId(73)
            },
            // Next day 00:30 UTC = 08:30 local, region 9 for 840s.
            SlotEntry {
                slot: 1_360_930,
                region: RegionId(9)
            },
        ]
    );
    let trace1 = to_slot_trace(id1, points1, &grid, 15, 8).unwrap();
    assert_eq!(
        trace1.entries,
        vec![
            // 900s of dwell in region 55.
            SlotEntry {
                slot: 1_361_168,
                region: RegionId(55)
            },
            // The sample here sits in region 66, but region 55 carries 300s
            // of accumulated dwell against zero: majority-dwell keeps 55.
            SlotEntry {
                slot: 1_361_169,
                region: RegionId(55)
            },
        ]
    );
    println!(
        "ACCEPTANCE 9 PASS: 3-file sample: 9 points, 1 skipped line, slot traces match \
         hand-verified fixtures"
    );
}
