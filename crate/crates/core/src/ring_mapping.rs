//! Sensing-ring geometry, gap estimation and the local obstacle map.
//!
//! Units sit on the sleeve around one vertebral disk, spaced by a fixed arc
//! length along the sleeve circumference. Each unit looks radially outward.
//! A filtered voltage becomes a gap estimate by inverting the unit's
//! calibration curve, clamped at the two saturation ends of the curve. Gap
//! estimates are then projected along the unit boresights into obstacle
//! points and tangent planes, and each channel gets a proximity zone.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optical_model::{invert_voltage, SensorCalibration};
use crate::pcc_kinematics::{DiskPose, Pose};

/// Retention horizon for obstacle points from earlier ticks.
pub const DEFAULT_HORIZON_MS: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("invalid ring layout: {0}")]
    InvalidLayout(String),
    #[error("unit {unit} outside 0..{count}")]
    UnitOutOfRange { unit: usize, count: usize },
    #[error("{gaps} gap estimates but {poses} sensor poses")]
    Misaligned { gaps: usize, poses: usize },
    #[error("non-finite reading {0} on channel {1}")]
    NonFiniteReading(f64, u8),
    #[error("invalid zone thresholds: need 0 < d_intrude ({0}) < d_warn ({1})")]
    InvalidZones(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingLayout {
    pub sleeve_outer_diameter: f64,
    pub unit_spacing: f64,
    pub unit_count: usize,
    pub mount_disk_index: usize,
    pub first_unit_azimuth: f64,
}

impl Default for RingLayout {
    fn default() -> Self {
        Self {
            sleeve_outer_diameter: 10.7,
            unit_spacing: 6.25,
            unit_count: 4,
            mount_disk_index: 1,
            first_unit_azimuth: 0.0,
        }
    }
}

impl RingLayout {
    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.sleeve_outer_diameter > 0.0 && self.sleeve_outer_diameter.is_finite()) {
            return Err(MapError::InvalidLayout("sleeve diameter must be positive".into()));
        }
        if !(self.unit_spacing > 0.0 && self.unit_spacing.is_finite()) {
            return Err(MapError::InvalidLayout("unit spacing must be positive".into()));
        }
        if self.unit_count == 0 || self.unit_count > 256 {
            return Err(MapError::InvalidLayout("unit count must be in 1..=256".into()));
        }
        if self.mount_disk_index == 0 {
            return Err(MapError::InvalidLayout("mount disk index is 1-based".into()));
        }
        if !self.first_unit_azimuth.is_finite() {
            return Err(MapError::InvalidLayout("first unit azimuth must be finite".into()));
        }
        let occupied = self.unit_spacing * (self.unit_count - 1) as f64;
        if occupied >= std::f64::consts::PI * self.sleeve_outer_diameter {
            return Err(MapError::InvalidLayout(format!(
                "{} units at {} mm spacing do not fit on a {} mm sleeve",
                self.unit_count, self.unit_spacing, self.sleeve_outer_diameter
            )));
        }
        Ok(())
    }

    /// Angle between adjacent unit centres, rad: arc length over radius.
    pub fn azimuth_step(&self) -> f64 {
        2.0 * self.unit_spacing / self.sleeve_outer_diameter
    }

    /// Angle between the outermost unit centres, rad.
    pub fn coverage_span(&self) -> f64 {
        self.azimuth_step() * (self.unit_count.saturating_sub(1)) as f64
    }

    pub fn sleeve_radius(&self) -> f64 {
        self.sleeve_outer_diameter / 2.0
    }
}

pub fn unit_azimuths(layout: &RingLayout) -> Vec<f64> {
    let step = layout.azimuth_step();
    (0..layout.unit_count)
        .map(|i| layout.first_unit_azimuth + i as f64 * step)
        .collect()
}

/// World pose of a sensing unit. The local x-axis is the boresight and the
/// local z-axis is the disk normal.
pub fn sensor_world_pose(disk: &DiskPose, layout: &RingLayout, unit: usize) -> Result<Pose, MapError> {
    if unit >= layout.unit_count {
        return Err(MapError::UnitOutOfRange { unit, count: layout.unit_count });
    }
    let azimuth = layout.first_unit_azimuth + unit as f64 * layout.azimuth_step();
    let mount = Pose::new(
        Vector3::new(azimuth.cos(), azimuth.sin(), 0.0) * layout.sleeve_radius(),
        Rotation3::from_axis_angle(&Vector3::z_axis(), azimuth).into_inner(),
    );
    Ok(disk.pose.compose(&mount))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapStatus {
    Contact,
    InRange,
    BeyondRange,
}

impl GapStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            GapStatus::Contact => "contact",
            GapStatus::InRange => "in-range",
            GapStatus::BeyondRange => "beyond-range",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "contact" => Some(GapStatus::Contact),
            "in-range" => Some(GapStatus::InRange),
            "beyond-range" => Some(GapStatus::BeyondRange),
            _ => None,
        }
    }
}

impl fmt::Display for GapStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub channel: u8,
    pub distance: f64,
    pub status: GapStatus,
    pub timestamp: u64,
}

/// Calibrated gap for a filtered voltage.
///
/// Readings past the near-saturation end report contact, readings past the
/// far-saturation end report `max_distance`. Which threshold is which follows
/// the sign of the curve slope.
pub fn reading_to_gap(v: f64, calib: &SensorCalibration, channel: u8, timestamp: u64) -> Result<GapEstimate, MapError> {
    if !v.is_finite() {
        return Err(MapError::NonFiniteReading(v, channel));
    }
    let decreasing = calib.curve.k_slope < 0.0;
    let near = if decreasing { v >= calib.threshold_up } else { v <= calib.threshold_low };
    let far = if decreasing { v <= calib.threshold_low } else { v >= calib.threshold_up };
    let (distance, status) = if near {
        (0.0, GapStatus::Contact)
    } else if far {
        (calib.max_distance, GapStatus::BeyondRange)
    } else {
        match invert_voltage(v, calib) {
            Ok(d) if d <= 0.0 => (0.0, GapStatus::Contact),
            Ok(d) if d >= calib.max_distance => (calib.max_distance, GapStatus::BeyondRange),
            Ok(d) => (d, GapStatus::InRange),
            // Thresholds wider than the logistic range: clamp to the nearer end.
            Err(_) => {
                let toward_near = if decreasing {
                    v >= calib.curve.v_max + calib.curve.epsilon
                } else {
                    v <= calib.curve.epsilon
                };
                if toward_near {
                    (0.0, GapStatus::Contact)
                } else {
                    (calib.max_distance, GapStatus::BeyondRange)
                }
            }
        }
    };
    Ok(GapEstimate { channel, distance, status, timestamp })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Safe,
    Warning,
    Intrusion,
}

impl Zone {
    pub fn as_str(&self) -> &'static str {
        match self {
            Zone::Safe => "safe",
            Zone::Warning => "warning",
            Zone::Intrusion => "intrusion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "safe" => Some(Zone::Safe),
            "warning" => Some(Zone::Warning),
            "intrusion" => Some(Zone::Intrusion),
            _ => None,
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneThresholds {
    pub d_warn: f64,
    pub d_intrude: f64,
}

impl Default for ZoneThresholds {
    fn default() -> Self {
        Self { d_warn: 10.0, d_intrude: 3.0 }
    }
}

impl ZoneThresholds {
    pub fn new(d_warn: f64, d_intrude: f64) -> Result<Self, MapError> {
        let t = Self { d_warn, d_intrude };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.d_intrude > 0.0 && self.d_intrude < self.d_warn && self.d_warn.is_finite()) {
            return Err(MapError::InvalidZones(self.d_intrude, self.d_warn));
        }
        Ok(())
    }
}

/// Boundary distances fall into the closer zone.
pub fn classify_zone(distance: f64, thresholds: &ZoneThresholds) -> Zone {
    if distance <= thresholds.d_intrude {
        Zone::Intrusion
    } else if distance <= thresholds.d_warn {
        Zone::Warning
    } else {
        Zone::Safe
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Vector3<f64>,
    /// Unit normal pointing away from the robot.
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePoint {
    pub position: Vector3<f64>,
    pub channel: u8,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub gap: GapEstimate,
    pub plane: Option<Plane>,
    pub zone: Zone,
}

/// Local obstacle map. Channels that never reported are absent and must be
/// treated as unobserved, not safe.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObstacleMap {
    pub channels: BTreeMap<u8, ChannelState>,
    pub points: Vec<ObstaclePoint>,
    pub stamp: u64,
}

impl ObstacleMap {
    pub fn zone(&self, channel: u8) -> Option<Zone> {
        self.channels.get(&channel).map(|c| c.zone)
    }

    pub fn planes(&self) -> impl Iterator<Item = (u8, &Plane)> {
        self.channels
            .iter()
            .filter_map(|(&ch, s)| s.plane.as_ref().map(|p| (ch, p)))
    }

    /// Most severe zone over observed channels.
    pub fn worst_zone(&self) -> Option<Zone> {
        self.channels.values().map(|c| c.zone).max()
    }
}

pub fn update_map(
    gaps: &[GapEstimate],
    poses: &[Pose],
    thresholds: &ZoneThresholds,
    prev: &ObstacleMap,
) -> Result<ObstacleMap, MapError> {
    update_map_with_horizon(gaps, poses, thresholds, prev, DEFAULT_HORIZON_MS)
}

/// Merge one tick of gap estimates into `prev`. `gaps[i]` was measured from
/// `poses[i]`; channels not mentioned keep their previous state.
pub fn update_map_with_horizon(
    gaps: &[GapEstimate],
    poses: &[Pose],
    thresholds: &ZoneThresholds,
    prev: &ObstacleMap,
    horizon_ms: u64,
) -> Result<ObstacleMap, MapError> {
    if gaps.len() != poses.len() {
        return Err(MapError::Misaligned { gaps: gaps.len(), poses: poses.len() });
    }
    let stamp = gaps.iter().map(|g| g.timestamp).fold(prev.stamp, u64::max);
    let mut points: Vec<ObstaclePoint> = prev
        .points
        .iter()
        .filter(|p| p.timestamp.saturating_add(horizon_ms) > stamp)
        .copied()
        .collect();
    let mut channels = prev.channels.clone();

    for (gap, pose) in gaps.iter().zip(poses) {
        let boresight = pose.x_axis();
        let state = match gap.status {
            GapStatus::BeyondRange => ChannelState { gap: *gap, plane: None, zone: Zone::Safe },
            GapStatus::Contact | GapStatus::InRange => {
                let distance = if gap.status == GapStatus::Contact { 0.0 } else { gap.distance };
                let position = pose.position + boresight * distance;
                points.push(ObstaclePoint { position, channel: gap.channel, timestamp: gap.timestamp });
                let zone = if gap.status == GapStatus::Contact {
                    Zone::Intrusion
                } else {
                    classify_zone(distance, thresholds)
                };
                ChannelState {
                    gap: *gap,
                    plane: Some(Plane { point: position, normal: boresight }),
                    zone,
                }
            }
        };
        channels.insert(gap.channel, state);
    }

    Ok(ObstacleMap { channels, points, stamp })
}
