//! Raw calibration sweeps in, fitted per-unit parameters out.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use super::{check_header, read_text, version_header, HarnessError};
use crate::optical_model::{CalibrationSample, Logistic, SensorCalibration};

pub const CALIBRATION_KIND: &str = "circumsense-calibration";
pub const CALIBRATION_COLUMNS: [&str; 9] = [
    "unit_id",
    "v_max",
    "k_slope",
    "delta_z0",
    "epsilon",
    "threshold_low",
    "threshold_up",
    "max_distance",
    "r_squared",
];

/// Samples of one sensing unit, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSamples {
    pub unit_id: u8,
    pub samples: Vec<CalibrationSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRecord {
    pub unit_id: u8,
    pub calibration: SensorCalibration,
    pub r_squared: f64,
}

fn unit_column(name: &str) -> Option<u8> {
    name.strip_prefix("unit")?.strip_suffix("_v")?.parse().ok()
}

/// Parse a sweep table with header `distance_mm,unit0_v,unit1_v,...`.
/// Lines starting with `#` are ignored.
pub fn parse_calibration_text(text: &str, context: &str) -> Result<Vec<UnitSamples>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| HarnessError::parse(context, 1, e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(HarnessError::Empty(context.to_string()));
    }
    let hline = text.lines().take_while(|l| l.trim_start().starts_with('#')).count() + 1;
    if headers.get(0) != Some("distance_mm") {
        return Err(HarnessError::parse(context, hline, "first column must be `distance_mm`"));
    }
    let mut units = Vec::new();
    let mut seen = BTreeSet::new();
    for name in headers.iter().skip(1) {
        let id = unit_column(name)
            .ok_or_else(|| HarnessError::parse(context, hline, format!("column `{name}` is not `unit<N>_v`")))?;
        if !seen.insert(id) {
            return Err(HarnessError::parse(context, hline, format!("duplicate column `{name}`")));
        }
        units.push(UnitSamples { unit_id: id, samples: Vec::new() });
    }
    if units.is_empty() {
        return Err(HarnessError::parse(context, hline, "no `unit<N>_v` columns"));
    }

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            HarnessError::parse(context, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(HarnessError::parse(
                context,
                line,
                format!("expected {} columns, got {}", headers.len(), record.len()),
            ));
        }
        let cell = |i: usize| -> Result<f64, HarnessError> {
            record[i]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| HarnessError::parse(context, line, format!("non-numeric `{}` in `{}`", &record[i], &headers[i])))
        };
        let distance = cell(0)?;
        for (j, unit) in units.iter_mut().enumerate() {
            unit.samples.push(CalibrationSample::new(distance, cell(j + 1)?));
        }
    }
    if units[0].samples.is_empty() {
        return Err(HarnessError::Empty(context.to_string()));
    }
    Ok(units)
}

pub fn parse_calibration_csv(path: &Path) -> Result<Vec<UnitSamples>, HarnessError> {
    parse_calibration_text(&read_text(path)?, &path.display().to_string())
}

pub fn calibration_to_text(records: &[CalibrationRecord]) -> String {
    let mut out = version_header(CALIBRATION_KIND);
    out.push('\n');
    out.push_str(&CALIBRATION_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        let c = &r.calibration;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.unit_id,
            c.curve.v_max,
            c.curve.k_slope,
            c.curve.delta_z0,
            c.curve.epsilon,
            c.threshold_low,
            c.threshold_up,
            c.max_distance,
            r.r_squared
        ));
    }
    out
}

pub fn calibration_from_text(text: &str, context: &str) -> Result<Vec<CalibrationRecord>, HarnessError> {
    check_header(CALIBRATION_KIND, context, text.lines().next())?;
    let body_start = text.find('\n').map_or(text.len(), |i| i + 1);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(&text.as_bytes()[body_start..]);
    // Reader lines are counted from the body; the header line is line 1.
    let line_of = |p: Option<&csv::Position>| p.map_or(0, |p| p.line() as usize + 1);
    let headers = rdr.headers().map_err(|e| HarnessError::parse(context, 2, e.to_string()))?.clone();
    let mut index = [0usize; 9];
    for (slot, name) in index.iter_mut().zip(CALIBRATION_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::parse(context, 2, format!("missing column `{name}`")))?;
    }

    let mut records = Vec::new();
    let mut ids = BTreeSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| HarnessError::parse(context, line_of(e.position()), e.to_string()))?;
        let line = line_of(row.position());
        let num = |k: usize| -> Result<f64, HarnessError> {
            let s = &row[index[k]];
            s.parse::<f64>()
                .map_err(|_| HarnessError::parse(context, line, format!("bad `{}` value `{s}`", CALIBRATION_COLUMNS[k])))
        };
        let unit_id: u8 = row[index[0]]
            .parse()
            .map_err(|_| HarnessError::parse(context, line, format!("bad unit_id `{}`", &row[index[0]])))?;
        if !ids.insert(unit_id) {
            return Err(HarnessError::parse(context, line, format!("duplicate unit_id {unit_id}")));
        }
        let invalid = |e: crate::optical_model::OpticalError| HarnessError::parse(context, line, e.to_string());
        let curve = Logistic::new(num(1)?, num(2)?, num(3)?, num(4)?).map_err(invalid)?;
        let calibration = SensorCalibration::new(curve, num(5)?, num(6)?, num(7)?).map_err(invalid)?;
        records.push(CalibrationRecord { unit_id, calibration, r_squared: num(8)? });
    }
    if records.is_empty() {
        return Err(HarnessError::Empty(context.to_string()));
    }
    Ok(records)
}

pub fn read_calibration_file(path: &Path) -> Result<Vec<CalibrationRecord>, HarnessError> {
    calibration_from_text(&read_text(path)?, &path.display().to_string())
}

pub fn write_calibration_file(path: &Path, records: &[CalibrationRecord]) -> Result<(), HarnessError> {
    super::write_atomic(path, calibration_to_text(records).as_bytes())
}
