//! The four CLI commands. Each reads all inputs, computes every output in
//! memory, then writes the outputs together.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::calibration_io::{calibration_to_text, parse_calibration_csv, CalibrationRecord};
use super::frame::{frames_to_text, read_frames, FrameKind, StreamFrame};
use super::scenario_file::load_scenario;
use super::trace::{append_map_rows, channel_table, error_table, map_header, read_trace, report_to_json, trace_to_text};
use super::{write_all_atomic, HarnessError, FORMAT_VERSION};
use crate::counts_to_volts;
use crate::lumen_sim::runner::compute_metrics;
use crate::lumen_sim::{run_scenario, RunMetrics, RunOutput, SimError};
use crate::optical_model::fit_calibration;
use crate::pcc_kinematics::disk_pose;
use crate::ring_mapping::{reading_to_gap, sensor_world_pose, update_map_with_horizon, GapEstimate, ObstacleMap};
use crate::signal_pipeline::{FilterBank, RawSample};

#[derive(Debug, Clone, Serialize)]
pub struct UnitFitSummary {
    pub unit_id: u8,
    pub samples: usize,
    pub r_squared: f64,
    pub residual_rms_v: f64,
    pub iterations: usize,
}

#[derive(Debug, Serialize)]
struct FitReportDocument<'a> {
    format_version: u32,
    units: &'a [UnitFitSummary],
}

/// Fit every unit of a sweep table and write the parameter file.
pub fn calibrate(csv_in: &Path, params_out: &Path, report_out: Option<&Path>) -> Result<Vec<UnitFitSummary>, HarnessError> {
    let units = parse_calibration_csv(csv_in)?;
    let mut records = Vec::with_capacity(units.len());
    let mut summary = Vec::with_capacity(units.len());
    for u in &units {
        let fit = fit_calibration(&u.samples, None)
            .map_err(|e| HarnessError::Format(format!("unit {}: {e}", u.unit_id)))?;
        records.push(CalibrationRecord { unit_id: u.unit_id, calibration: fit.calibration, r_squared: fit.r_squared });
        summary.push(UnitFitSummary {
            unit_id: u.unit_id,
            samples: u.samples.len(),
            r_squared: fit.r_squared,
            residual_rms_v: fit.residual_rms,
            iterations: fit.iterations,
        });
    }
    let mut outputs = vec![(params_out, calibration_to_text(&records).into_bytes())];
    if let Some(path) = report_out {
        let doc = FitReportDocument { format_version: FORMAT_VERSION, units: &summary };
        let mut json = serde_json::to_string_pretty(&doc).expect("fit summary serializes");
        json.push('\n');
        outputs.push((path, json.into_bytes()));
    }
    write_all_atomic(&outputs)?;
    Ok(summary)
}

/// Raw frames as the acquisition board would have sent them.
pub fn raw_frames(out: &RunOutput) -> Vec<StreamFrame> {
    out.trace
        .iter()
        .map(|r| StreamFrame::raw(r.t_ms, r.channel, r.raw_counts))
        .collect()
}

pub fn simulate(
    scenario_in: &Path,
    trace_out: &Path,
    report_out: &Path,
    frames_out: Option<&Path>,
) -> Result<RunMetrics, HarnessError> {
    let scenario = load_scenario(scenario_in)?;
    let out = run_scenario(&scenario)?;
    let units = scenario.layout.unit_count;
    let mut outputs = vec![
        (trace_out, trace_to_text(&out.trace).into_bytes()),
        (report_out, report_to_json(&out.metrics, scenario.tick_count(), units, Some(scenario.seed)).into_bytes()),
    ];
    if let Some(path) = frames_out {
        let text = frames_to_text(&raw_frames(&out)).map_err(|e| HarnessError::Format(e.to_string()))?;
        outputs.push((path, text.into_bytes()));
    }
    write_all_atomic(&outputs)?;
    Ok(out.metrics)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub frames: usize,
    pub ticks: usize,
    pub final_map: ObstacleMap,
}

/// Feed recorded frames through filtering and the map update, with sensor
/// poses from the scenario's kinematics. Frames sharing a timestamp form one
/// tick. Raw frames are filtered; filtered frames are used as they are.
pub fn replay(
    frames_in: &Path,
    scenario_in: &Path,
    map_out: &Path,
    filtered_out: Option<&Path>,
) -> Result<ReplaySummary, HarnessError> {
    let scenario = load_scenario(scenario_in)?;
    let frames = read_frames(frames_in)?;
    let units = scenario.layout.unit_count;
    if let Some(&(line, f)) = frames.iter().find(|(_, f)| f.channel as usize >= units) {
        return Err(HarnessError::UnknownChannel { channel: f.channel, line, units });
    }
    if let Some(w) = frames.windows(2).find(|w| w[1].1.timestamp < w[0].1.timestamp) {
        return Err(HarnessError::parse(
            frames_in.display().to_string(),
            w[1].0,
            format!("timestamp {} goes backwards", w[1].1.timestamp),
        ));
    }

    let mut bank = FilterBank::new(units, scenario.filter)?;
    let mut map = ObstacleMap::default();
    let mut map_text = map_header();
    let mut filtered = Vec::new();
    let mut ticks = 0;
    for tick in frames.chunk_by(|a, b| a.1.timestamp == b.1.timestamp) {
        let t = tick[0].1.timestamp;
        let cfg = scenario.config_at(t as f64)?;
        let disk = disk_pose(scenario.layout.mount_disk_index, &cfg, &scenario.geometry).map_err(SimError::from)?;
        let mut gaps: Vec<GapEstimate> = Vec::with_capacity(tick.len());
        let mut poses = Vec::with_capacity(tick.len());
        for &(_, f) in tick {
            let value = match f.kind {
                FrameKind::Raw => {
                    let s = bank.push(RawSample { timestamp: t, channel: f.channel, value: f.value })?;
                    filtered.push(StreamFrame { value: s.value, kind: FrameKind::Filtered, ..f });
                    s.value
                }
                FrameKind::Filtered => f.value,
            };
            let ch = f.channel as usize;
            gaps.push(reading_to_gap(counts_to_volts(value), &scenario.calibrations[ch], f.channel, t)?);
            poses.push(sensor_world_pose(&disk, &scenario.layout, ch)?);
        }
        map = update_map_with_horizon(&gaps, &poses, &scenario.zones, &map, scenario.horizon_ms)?;
        append_map_rows(&mut map_text, &map, units);
        ticks += 1;
    }

    let mut outputs = vec![(map_out, map_text.into_bytes())];
    if let Some(path) = filtered_out {
        let text = frames_to_text(&filtered).map_err(|e| HarnessError::Format(e.to_string()))?;
        outputs.push((path, text.into_bytes()));
    }
    write_all_atomic(&outputs)?;
    Ok(ReplaySummary { frames: frames.len(), ticks, final_map: map })
}

/// Metrics recomputed from a trace file. Returns the rendered summary.
pub fn report(trace_in: &Path, table_out: Option<&Path>, errors_out: Option<&Path>) -> Result<String, HarnessError> {
    let trace = read_trace(trace_in)?;
    let channels = trace.iter().map(|r| r.channel as usize + 1).max().unwrap_or(0);
    let metrics = compute_metrics(&trace, channels, &[]);
    let mut text = channel_table(&metrics);
    let _ = writeln!(text, "zone transitions {}", metrics.zone_transitions.len());
    for z in &metrics.zone_transitions {
        let from = z.from.map_or("-", |f| f.as_str());
        let _ = writeln!(text, "  t={} ch={} {from} -> {}", z.t_ms, z.channel, z.to);
    }
    let mut outputs = Vec::new();
    if let Some(path) = table_out {
        outputs.push((path, text.clone().into_bytes()));
    }
    if let Some(path) = errors_out {
        outputs.push((path, error_table(&trace, channels).into_bytes()));
    }
    write_all_atomic(&outputs)?;
    Ok(text)
}
