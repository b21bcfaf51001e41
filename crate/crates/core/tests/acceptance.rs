//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use circumsense::harness::scenario_file::scenario_to_file;
use circumsense::lumen_sim::{default_unit_calibrations, default_unit_curves, run_scenario, NoiseModel, Scenario};
use circumsense::optical_model::{fit_calibration, CalibrationSample, Logistic};
use circumsense::pcc_kinematics::{
    cables_from_config, config_from_cables, forward_segment_pose, SegmentConfig, SegmentGeometry,
};
use circumsense::ring_mapping::RingLayout;
use circumsense::signal_pipeline::{signal_quality_index, variance, FilterConfig, FilterState, RawSample};
use circumsense::adc_step_volts;

// Tolerances.
const ROUND_TRIP_REL_TOL: f64 = 1e-9;
const ROUND_TRIP_SAMPLES: usize = 100_000;
const ROUND_TRIP_BUDGET_S: f64 = 5.0;
const SINGULAR_THETA: f64 = 1e-8;
const SINGULAR_TOL_MM: f64 = 1e-6;
const RECOVERY_REL_TOL: f64 = 1e-6;
const NOISY_R2_MIN: f64 = 0.993;
const CALIBRATION_NOISE_VAR_COUNTS2: f64 = 1.38;
const CALIBRATION_BUDGET_S: f64 = 1.0;
const IID_RATIO: (f64, f64) = (0.08, 0.12);
const IID_SAMPLES: usize = 100_000;
const RAW_VARIANCE: (f64, f64) = (1.2, 1.6);
const FILTERED_VARIANCE: (f64, f64) = (0.30, 0.40);
const NOISY_RMSE_MM: f64 = 0.25;
const NOISELESS_RMSE_MM: f64 = 0.01;
const RMSE_BUDGET_S: f64 = 30.0;
const LATENCY_MAX_MS: f64 = 200.0;
const LATENCY_MEDIAN_MS: f64 = 5.0;
const LATENCY_TICKS: usize = 10_000;
const MAP_INSTANCES: usize = 1000;
const SPAN_DEG: (f64, f64) = (190.0, 210.0);

const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo && x <= hi
}

fn kinematics_round_trip() -> Outcome {
    let start = Instant::now();
    let geom = SegmentGeometry::new(4.0, 2.0 * PI / 3.0, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..ROUND_TRIP_SAMPLES {
        let cfg = SegmentConfig::new(rng.random_range(0.0..PI), rng.random_range(-PI..PI), 100.0).unwrap();
        let q = cables_from_config(&cfg, &geom).unwrap();
        let back = cables_from_config(&config_from_cables(&q, &geom, 100.0).unwrap(), &geom).unwrap();
        for (a, b) in q.lengths().iter().zip(back.lengths()) {
            worst = worst.max((a - b).abs() / a.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < ROUND_TRIP_REL_TOL && secs < ROUND_TRIP_BUDGET_S,
        format!("max rel err {worst:.2e} (< {ROUND_TRIP_REL_TOL:.0e}), {secs:.2} s (< {ROUND_TRIP_BUDGET_S} s)"),
    )
}

fn singularity_continuity() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..16 {
        let phi = -PI + k as f64 * PI / 8.0;
        let pose = forward_segment_pose(&SegmentConfig::new(SINGULAR_THETA, phi, 100.0).unwrap());
        worst = worst.max((pose.position - nalgebra::Vector3::new(0.0, 0.0, 100.0)).norm());
    }
    outcome(worst < SINGULAR_TOL_MM, format!("max offset {worst:.2e} mm (< {SINGULAR_TOL_MM:.0e})"))
}

fn sweep(curve: &Logistic) -> Vec<CalibrationSample> {
    (0..60)
        .map(|i| {
            let d = 0.25 * (i + 1) as f64;
            CalibrationSample::new(d, curve.voltage(d))
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn calibration_recovery() -> Outcome {
    let start = Instant::now();
    let mut worst_rel: f64 = 0.0;
    let mut worst_r2: f64 = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let noise = Normal::new(0.0, CALIBRATION_NOISE_VAR_COUNTS2.sqrt() * adc_step_volts()).unwrap();
    for truth in default_unit_curves() {
        let fit = fit_calibration(&sweep(&truth), None).unwrap().calibration.curve;
        worst_rel = [
            rel(fit.v_max, truth.v_max),
            rel(fit.k_slope, truth.k_slope),
            rel(fit.delta_z0, truth.delta_z0),
            rel(fit.epsilon, truth.epsilon),
        ]
        .into_iter()
        .fold(worst_rel, f64::max);
        let noisy: Vec<CalibrationSample> = sweep(&truth)
            .into_iter()
            .map(|s| CalibrationSample::new(s.distance, s.voltage + noise.sample(&mut rng)))
            .collect();
        worst_r2 = worst_r2.min(fit_calibration(&noisy, None).unwrap().r_squared);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_rel < RECOVERY_REL_TOL && worst_r2 >= NOISY_R2_MIN && secs < CALIBRATION_BUDGET_S,
        format!(
            "noiseless max rel err {worst_rel:.2e} (< {RECOVERY_REL_TOL:.0e}), noisy min R^2 {worst_r2:.5} (>= {NOISY_R2_MIN}), {secs:.3} s (< {CALIBRATION_BUDGET_S} s)"
        ),
    )
}

fn filter_variance() -> Outcome {
    // i.i.d. input, continuous values well above the IQR floor.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let normal = Normal::new(500.0, 20.0).unwrap();
    let mut filter = FilterState::new(FilterConfig::default());
    let mut input = Vec::with_capacity(IID_SAMPLES);
    let mut output = Vec::with_capacity(IID_SAMPLES);
    for i in 0..IID_SAMPLES as u64 {
        let x = normal.sample(&mut rng);
        let y = filter.push_sample(RawSample { timestamp: i, channel: 0, value: x });
        if i >= 10 {
            input.push(x);
            output.push(y.value);
        }
    }
    let ratio = variance(&output).unwrap() / variance(&input).unwrap();

    let calib = default_unit_calibrations()[0];
    let stats = common::static_variance(&calib, &NoiseModel::paper_matched(), SEED);
    let min_improvement = stats
        .windows
        .iter()
        .map(|(r, f)| signal_quality_index(r, f).unwrap().improvement)
        .fold(f64::INFINITY, f64::min);
    outcome(
        within(ratio, IID_RATIO)
            && within(stats.raw, RAW_VARIANCE)
            && within(stats.filtered, FILTERED_VARIANCE)
            && min_improvement > 0.0,
        format!(
            "iid ratio {ratio:.4} in {IID_RATIO:?}; AR(1) raw {:.3} in {RAW_VARIANCE:?}, filtered {:.3} in {FILTERED_VARIANCE:?}; min SQI improvement {:+.2e}",
            stats.raw, stats.filtered, min_improvement
        ),
    )
}

fn approach(noise: NoiseModel, reference: Option<f64>) -> Scenario {
    Scenario::approach(noise, reference, 7, None, 12.0, 1.0, 1.0).unwrap()
}

fn end_to_end_rmse() -> Outcome {
    let start = Instant::now();
    let noisy = run_scenario(&approach(NoiseModel::paper_matched(), Some(0.1))).unwrap().metrics;
    let clean = run_scenario(&approach(NoiseModel::none(), None)).unwrap().metrics;
    let secs = start.elapsed().as_secs_f64();
    let worst = |m: &circumsense::lumen_sim::RunMetrics| {
        m.channels.iter().map(|c| c.rmse.unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    };
    let (n, c) = (worst(&noisy), worst(&clean));
    // Informational: error against the reference at the tick itself.
    let unaligned = noisy.channels.iter().filter_map(|ch| ch.rmse_at_tick).fold(0.0, f64::max);
    outcome(
        n <= NOISY_RMSE_MM && c <= NOISELESS_RMSE_MM && secs < RMSE_BUDGET_S,
        format!(
            "noisy max channel RMSE {n:.4} mm (<= {NOISY_RMSE_MM}), noiseless {c:.4} mm (<= {NOISELESS_RMSE_MM}), unaligned noisy {unaligned:.4} mm, {secs:.2} s (< {RMSE_BUDGET_S} s)"
        ),
    )
}

fn latency() -> Outcome {
    let bend = SegmentConfig::new(0.6, 0.9, 100.0).unwrap();
    // 11 mm at 0.11 mm/s: 100 s of 100 Hz ticks.
    let s = Scenario::approach(NoiseModel::paper_matched(), None, SEED, Some(bend), 12.0, 1.0, 0.11).unwrap();
    let out = run_scenario(&s).unwrap();
    let l = out.metrics.latency;
    outcome(
        l.ticks >= LATENCY_TICKS && l.max_ms < LATENCY_MAX_MS && l.median_ms < LATENCY_MEDIAN_MS,
        format!(
            "{} ticks, median {:.4} ms (< {LATENCY_MEDIAN_MS}), max {:.4} ms (< {LATENCY_MAX_MS})",
            l.ticks, l.median_ms, l.max_ms
        ),
    )
}

fn map_oracle() -> Outcome {
    let mismatches = common::map_oracle_mismatches(MAP_INSTANCES, SEED);
    outcome(mismatches == 0, format!("{mismatches} of {MAP_INSTANCES} instances differ from the rebuilt map"))
}

fn coverage() -> Outcome {
    let span = RingLayout::default().coverage_span().to_degrees();
    outcome(within(span, SPAN_DEG), format!("span {span:.2} deg in {SPAN_DEG:?}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("approach.toml");
    let text = scenario_to_file(&approach(NoiseModel::paper_matched(), Some(0.1))).to_toml().unwrap();
    std::fs::write(&scenario, text).unwrap();
    let run = |tag: &str| {
        let trace = dir.path().join(format!("trace_{tag}.csv"));
        let report = dir.path().join(format!("report_{tag}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_circumsense"))
            .arg("simulate")
            .arg(&scenario)
            .arg(&trace)
            .arg(&report)
            .output()
            .unwrap()
            .status;
        assert!(status.success(), "simulate exited with {status}");
        std::fs::read(trace).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    outcome(a == b && !a.is_empty(), format!("two traces of {} bytes, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("kinematics round trip", kinematics_round_trip),
        ("singularity continuity", singularity_continuity),
        ("calibration recovery", calibration_recovery),
        ("filter variance", filter_variance),
        ("end-to-end RMSE", end_to_end_rmse),
        ("pipeline latency", latency),
        ("map oracle equivalence", map_oracle),
        ("coverage geometry", coverage),
        ("simulate determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {}: {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
