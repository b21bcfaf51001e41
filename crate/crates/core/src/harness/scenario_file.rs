//! TOML scenario documents.
//!
//! ```toml
//! format_version = 1
//! calibration_ref = "units.cal"   # or [[calibration]] tables
//!
//! [robot]
//! length = 100.0
//! cable_radius = 4.0
//! cable_phase_deg = 120.0
//! disk_count = 5
//! mount_disk = 3
//!
//! [ring]
//! sleeve_diameter = 10.7
//! unit_spacing = 6.25
//! units = 4
//! first_azimuth_deg = 0.0
//!
//! [noise]
//! kind = "ar1"
//! sigma = 1.14
//! ar_coefficient = 0.54
//!
//! [[obstacles]]
//! shape = { kind = "plane", point = [17.35, 0.0, 60.0], normal = [-1.0, 0.0, 0.0] }
//! trajectory = [{ t_ms = 0.0, offset = [0.0, 0.0, 0.0] }]
//!
//! [[actuation]]
//! t_ms = 0.0
//! q = [100.0, 100.0, 100.0]
//!
//! [run]
//! duration_ms = 11000.0
//! rate_hz = 100.0
//! seed = 7
//!
//! [zones]
//! d_warn = 10.0
//! d_intrude = 3.0
//! ```
//!
//! Lengths are millimetres. Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::calibration_io::{read_calibration_file, CalibrationRecord};
use super::{read_text, HarnessError, FORMAT_VERSION};
use crate::lumen_sim::scenario::{DEFAULT_MAX_RANGE_MM, DEFAULT_SAMPLE_RATE_HZ};
use crate::lumen_sim::{ActuationKey, NoiseModel, Obstacle, Scenario};
use crate::optical_model::{Logistic, SensorCalibration};
use crate::pcc_kinematics::SegmentGeometry;
use crate::ring_mapping::{RingLayout, ZoneThresholds, DEFAULT_HORIZON_MS};
use crate::signal_pipeline::FilterConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSection {
    pub length: f64,
    pub cable_radius: f64,
    #[serde(default = "default_cable_phase_deg")]
    pub cable_phase_deg: f64,
    pub disk_count: usize,
    pub mount_disk: usize,
}

fn default_cable_phase_deg() -> f64 {
    120.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSection {
    pub sleeve_diameter: f64,
    pub unit_spacing: f64,
    pub units: usize,
    #[serde(default)]
    pub first_azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration_ms: f64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    pub seed: u64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default = "default_horizon")]
    pub horizon_ms: u64,
    /// Uniform error bound of the simulated reference, mm.
    #[serde(default)]
    pub reference_noise: Option<f64>,
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

fn default_max_range() -> f64 {
    DEFAULT_MAX_RANGE_MM
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON_MS
}

/// Inline calibration record; same fields as a calibration file row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineCalibration {
    pub unit_id: u8,
    pub v_max: f64,
    pub k_slope: f64,
    pub delta_z0: f64,
    pub epsilon: f64,
    pub threshold_low: f64,
    pub threshold_up: f64,
    pub max_distance: f64,
    #[serde(default)]
    pub r_squared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub robot: RobotSection,
    pub ring: RingSection,
    #[serde(default)]
    pub calibration_ref: Option<PathBuf>,
    #[serde(default)]
    pub calibration: Vec<InlineCalibration>,
    #[serde(default = "NoiseModel::none")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub actuation: Vec<ActuationKey>,
    pub run: RunSection,
    #[serde(default)]
    pub zones: ZoneThresholds,
    #[serde(default)]
    pub filter: FilterConfig,
}

fn records_to_calibrations(
    mut records: Vec<CalibrationRecord>,
    units: usize,
    context: &str,
) -> Result<Vec<SensorCalibration>, HarnessError> {
    records.sort_by_key(|r| r.unit_id);
    let ids: Vec<u8> = records.iter().map(|r| r.unit_id).collect();
    if ids.len() != units || ids.iter().enumerate().any(|(i, &id)| id as usize != i) {
        return Err(HarnessError::Format(format!(
            "{context}: calibration unit ids {ids:?} do not cover units 0..{units}"
        )));
    }
    Ok(records.into_iter().map(|r| r.calibration).collect())
}

impl ScenarioFile {
    pub fn parse(text: &str, context: &str) -> Result<Self, HarnessError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| HarnessError::Format(format!("{context}: {e}")))?;
        if file.format_version != FORMAT_VERSION {
            return Err(HarnessError::Format(format!(
                "{context}: unsupported format_version {}",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Format(e.to_string()))
    }

    /// Build and validate the scenario. A relative `calibration_ref` is
    /// resolved against `base_dir`.
    pub fn into_scenario(self, base_dir: &Path, context: &str) -> Result<Scenario, HarnessError> {
        let calibrations = match (&self.calibration_ref, self.calibration.is_empty()) {
            (Some(_), false) => {
                return Err(HarnessError::Format(format!(
                    "{context}: give either calibration_ref or inline calibration, not both"
                )))
            }
            (None, true) => return Err(HarnessError::Format(format!("{context}: no calibration given"))),
            (Some(r), true) => {
                let path = base_dir.join(r);
                let records = read_calibration_file(&path)?;
                records_to_calibrations(records, self.ring.units, &path.display().to_string())?
            }
            (None, false) => {
                let mut records = Vec::with_capacity(self.calibration.len());
                for c in &self.calibration {
                    let curve = Logistic::new(c.v_max, c.k_slope, c.delta_z0, c.epsilon)?;
                    let calibration = SensorCalibration::new(curve, c.threshold_low, c.threshold_up, c.max_distance)?;
                    records.push(CalibrationRecord { unit_id: c.unit_id, calibration, r_squared: c.r_squared.unwrap_or(f64::NAN) });
                }
                let mut ids: Vec<u8> = records.iter().map(|r| r.unit_id).collect();
                ids.sort_unstable();
                if ids.windows(2).any(|w| w[0] == w[1]) {
                    return Err(HarnessError::Format(format!("{context}: duplicate calibration unit_id")));
                }
                records_to_calibrations(records, self.ring.units, context)?
            }
        };
        let geometry = SegmentGeometry::new(
            self.robot.cable_radius,
            self.robot.cable_phase_deg.to_radians(),
            self.robot.disk_count,
        )
        .map_err(|e| HarnessError::Format(format!("{context}: robot: {e}")))?;
        let scenario = Scenario {
            segment_length: self.robot.length,
            geometry,
            layout: RingLayout {
                sleeve_outer_diameter: self.ring.sleeve_diameter,
                unit_spacing: self.ring.unit_spacing,
                unit_count: self.ring.units,
                mount_disk_index: self.robot.mount_disk,
                first_unit_azimuth: self.ring.first_azimuth_deg.to_radians(),
            },
            calibrations,
            noise: self.noise,
            obstacles: self.obstacles,
            duration_ms: self.run.duration_ms,
            sample_rate_hz: self.run.rate_hz,
            actuation: self.actuation,
            seed: self.run.seed,
            zones: self.zones,
            filter: self.filter,
            mocap_noise: self.run.reference_noise,
            max_range: self.run.max_range,
            horizon_ms: self.run.horizon_ms,
        };
        scenario.validate().map_err(|e| HarnessError::Format(format!("{context}: {e}")))?;
        Ok(scenario)
    }
}

/// Scenario document with inline calibration reproducing `s`.
pub fn scenario_to_file(s: &Scenario) -> ScenarioFile {
    ScenarioFile {
        format_version: FORMAT_VERSION,
        robot: RobotSection {
            length: s.segment_length,
            cable_radius: s.geometry.cable_radius(),
            cable_phase_deg: s.geometry.cable_phase().to_degrees(),
            disk_count: s.geometry.disk_count(),
            mount_disk: s.layout.mount_disk_index,
        },
        ring: RingSection {
            sleeve_diameter: s.layout.sleeve_outer_diameter,
            unit_spacing: s.layout.unit_spacing,
            units: s.layout.unit_count,
            first_azimuth_deg: s.layout.first_unit_azimuth.to_degrees(),
        },
        calibration_ref: None,
        calibration: s
            .calibrations
            .iter()
            .enumerate()
            .map(|(i, c)| InlineCalibration {
                unit_id: i as u8,
                v_max: c.curve.v_max,
                k_slope: c.curve.k_slope,
                delta_z0: c.curve.delta_z0,
                epsilon: c.curve.epsilon,
                threshold_low: c.threshold_low,
                threshold_up: c.threshold_up,
                max_distance: c.max_distance,
                r_squared: None,
            })
            .collect(),
        noise: s.noise,
        obstacles: s.obstacles.clone(),
        actuation: s.actuation.clone(),
        run: RunSection {
            duration_ms: s.duration_ms,
            rate_hz: s.sample_rate_hz,
            seed: s.seed,
            max_range: s.max_range,
            horizon_ms: s.horizon_ms,
            reference_noise: s.mocap_noise,
        },
        zones: s.zones,
        filter: s.filter,
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    let context = path.display().to_string();
    let file = ScenarioFile::parse(&read_text(path)?, &context)?;
    let base = path.parent().unwrap_or(Path::new("."));
    file.into_scenario(base, &context)
}
