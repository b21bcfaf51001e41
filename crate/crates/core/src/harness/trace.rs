//! Columnar trace, map and report outputs.
//!
//! Numbers are printed with fixed precision so identical runs give
//! identical bytes. Missing values are empty cells.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{check_header, read_text, version_header, HarnessError, FORMAT_VERSION};
use crate::lumen_sim::{RunMetrics, TraceRecord};
use crate::ring_mapping::{GapStatus, ObstacleMap, Zone};

pub const TRACE_KIND: &str = "circumsense-trace";
pub const MAP_KIND: &str = "circumsense-map";
pub const ERRORS_KIND: &str = "circumsense-errors";

pub const TRACE_COLUMNS: [&str; 13] = [
    "t_ms",
    "channel",
    "raw_counts",
    "filtered_counts",
    "rejected",
    "voltage_v",
    "estimate_mm",
    "status",
    "zone",
    "ray_mm",
    "euclid_mm",
    "reference_mm",
    "reference_tick_mm",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn trace_to_text(trace: &[TraceRecord]) -> String {
    let mut out = version_header(TRACE_KIND);
    out.push('\n');
    out.push_str(&TRACE_COLUMNS.join(","));
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{},{:.6},{:.6},{},{},{},{},{},{}",
            r.t_ms,
            r.channel,
            r.raw_counts,
            r.filtered_counts,
            r.rejected as u8,
            r.voltage,
            r.estimate,
            r.status,
            r.zone,
            opt(r.ray_distance),
            opt(r.euclidean_distance),
            opt(r.reference),
            opt(r.reference_at_tick),
        );
    }
    out
}

pub fn trace_from_text(text: &str, context: &str) -> Result<Vec<TraceRecord>, HarnessError> {
    let mut lines = text.lines().enumerate();
    check_header(TRACE_KIND, context, lines.next().map(|(_, l)| l))?;
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_COLUMNS.join(",") => {}
        _ => return Err(HarnessError::parse(context, 2, "unexpected column header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != TRACE_COLUMNS.len() {
            return Err(HarnessError::parse(context, n, format!("expected {} cells, got {}", TRACE_COLUMNS.len(), cells.len())));
        }
        let err = |col: usize| HarnessError::parse(context, n, format!("bad `{}` value `{}`", TRACE_COLUMNS[col], cells[col]));
        let num = |col: usize| cells[col].parse::<f64>().map_err(|_| err(col));
        let maybe = |col: usize| -> Result<Option<f64>, HarnessError> {
            if cells[col].is_empty() {
                Ok(None)
            } else {
                num(col).map(Some)
            }
        };
        out.push(TraceRecord {
            t_ms: cells[0].parse().map_err(|_| err(0))?,
            channel: cells[1].parse().map_err(|_| err(1))?,
            raw_counts: cells[2].parse().map_err(|_| err(2))?,
            filtered_counts: num(3)?,
            rejected: match cells[4] {
                "0" => false,
                "1" => true,
                _ => return Err(err(4)),
            },
            voltage: num(5)?,
            estimate: num(6)?,
            status: GapStatus::parse(cells[7]).ok_or_else(|| err(7))?,
            zone: Zone::parse(cells[8]).ok_or_else(|| err(8))?,
            ray_distance: maybe(9)?,
            euclidean_distance: maybe(10)?,
            reference: maybe(11)?,
            reference_at_tick: maybe(12)?,
        });
    }
    if out.is_empty() {
        return Err(HarnessError::Empty(context.to_string()));
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, HarnessError> {
    trace_from_text(&read_text(path)?, &path.display().to_string())
}

pub const MAP_COLUMNS: &str =
    "t_ms,channel,distance_mm,status,zone,point_x,point_y,point_z,normal_x,normal_y,normal_z,retained_points";

/// Append one tick of the map: a row per channel, `unknown` for channels
/// that have never reported.
pub fn append_map_rows(out: &mut String, map: &ObstacleMap, channels: usize) {
    for ch in 0..channels as u8 {
        let retained = map.points.iter().filter(|p| p.channel == ch).count();
        match map.channels.get(&ch) {
            None => {
                let _ = writeln!(out, "{},{ch},,unknown,,,,,,,,{retained}", map.stamp);
            }
            Some(state) => {
                let plane = match &state.plane {
                    Some(p) => format!(
                        "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                        p.point.x, p.point.y, p.point.z, p.normal.x, p.normal.y, p.normal.z
                    ),
                    None => ",,,,,".to_string(),
                };
                let _ = writeln!(
                    out,
                    "{},{ch},{:.6},{},{},{plane},{retained}",
                    map.stamp, state.gap.distance, state.gap.status, state.zone
                );
            }
        }
    }
}

pub fn map_header() -> String {
    format!("{}\n{MAP_COLUMNS}\n", version_header(MAP_KIND))
}

#[derive(Debug, Serialize)]
pub struct ReportDocument<'a> {
    pub format_version: u32,
    pub ticks: usize,
    pub channels: usize,
    pub seed: Option<u64>,
    pub metrics: &'a RunMetrics,
}

pub fn report_to_json(metrics: &RunMetrics, ticks: usize, channels: usize, seed: Option<u64>) -> String {
    let doc = ReportDocument { format_version: FORMAT_VERSION, ticks, channels, seed, metrics };
    let mut s = serde_json::to_string_pretty(&doc).expect("metrics serialize");
    s.push('\n');
    s
}

/// Per-channel summary table, whitespace aligned.
pub fn channel_table(metrics: &RunMetrics) -> String {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let mut out = format!(
        "{:>7} {:>9} {:>9} {:>13} {:>13}\n",
        "channel", "in_range", "rmse_mm", "max_abs_mm", "rmse_tick_mm"
    );
    for c in &metrics.channels {
        let _ = writeln!(
            out,
            "{:>7} {:>9} {:>9} {:>13} {:>13}",
            c.channel,
            c.in_range_ticks,
            f(c.rmse),
            f(c.max_abs_error),
            f(c.rmse_at_tick)
        );
    }
    let _ = writeln!(out, "overall rmse_mm {}", f(metrics.overall_rmse));
    out
}

/// Wide per-tick error table: `t_ms,err_ch0_mm,...`, empty where a channel
/// had no in-range estimate.
pub fn error_table(trace: &[TraceRecord], channels: usize) -> String {
    let mut out = version_header(ERRORS_KIND);
    out.push_str("\nt_ms");
    for ch in 0..channels {
        let _ = write!(out, ",err_ch{ch}_mm");
    }
    out.push('\n');
    let mut i = 0;
    while i < trace.len() {
        let t = trace[i].t_ms;
        let mut row = vec![String::new(); channels];
        while i < trace.len() && trace[i].t_ms == t {
            let r = &trace[i];
            if let (Some(slot), Some(e)) = (row.get_mut(r.channel as usize), r.error()) {
                *slot = format!("{e:.6}");
            }
            i += 1;
        }
        let _ = writeln!(out, "{t},{}", row.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lumen_sim::{run_scenario, NoiseModel, Scenario};

    #[test]
    fn trace_text_round_trip_is_stable() {
        let s = Scenario::approach(NoiseModel::paper_matched(), Some(0.1), 3, None, 8.0, 4.0, 8.0).unwrap();
        let out = run_scenario(&s).unwrap();
        let text = trace_to_text(&out.trace);
        let parsed = trace_from_text(&text, "mem").unwrap();
        assert_eq!(parsed.len(), out.trace.len());
        assert_eq!(trace_to_text(&parsed), text);
        assert_eq!(parsed[5].status, out.trace[5].status);
    }

    #[test]
    fn trace_parse_errors() {
        let head = format!("{}\n{}\n", version_header(TRACE_KIND), TRACE_COLUMNS.join(","));
        assert!(matches!(trace_from_text(&head, "t"), Err(HarnessError::Empty(_))));
        let bad = format!("{head}0,0,5,5.0,0,0.1,3.0,in-range,hot,,,,\n");
        let err = trace_from_text(&bad, "t").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("zone"), "{err}");
    }

    #[test]
    fn unknown_channels_in_map_rows() {
        let mut out = String::new();
        append_map_rows(&mut out, &ObstacleMap::default(), 2);
        assert_eq!(out, "0,0,,unknown,,,,,,,,0\n0,1,,unknown,,,,,,,,0\n");
        assert_eq!(out.lines().next().unwrap().split(',').count(), MAP_COLUMNS.split(',').count());
    }
}
