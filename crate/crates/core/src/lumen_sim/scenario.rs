use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::environment::{Keyframe, Obstacle, Shape};
use super::noise::NoiseModel;
use super::SimError;
use crate::optical_model::{Logistic, SensorCalibration};
use crate::pcc_kinematics::{
    cables_from_config, config_from_cables, disk_pose, ActuationVector, SegmentConfig, SegmentGeometry,
    DEFAULT_CABLE_PHASE,
};
use crate::ring_mapping::{sensor_world_pose, RingLayout, ZoneThresholds, DEFAULT_HORIZON_MS};
use crate::signal_pipeline::FilterConfig;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100.0;
/// Ray-cast range of the simulated environment, mm.
pub const DEFAULT_MAX_RANGE_MM: f64 = 100.0;

/// Cable lengths at a point in time; interpolated linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuationKey {
    pub t_ms: f64,
    pub q: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub segment_length: f64,
    pub geometry: SegmentGeometry,
    pub layout: RingLayout,
    pub calibrations: Vec<SensorCalibration>,
    pub noise: NoiseModel,
    pub obstacles: Vec<Obstacle>,
    pub duration_ms: f64,
    pub sample_rate_hz: f64,
    /// Empty means the segment stays straight.
    pub actuation: Vec<ActuationKey>,
    pub seed: u64,
    pub zones: ZoneThresholds,
    pub filter: FilterConfig,
    /// Uniform error bound of the reference system, mm.
    pub mocap_noise: Option<f64>,
    pub max_range: f64,
    pub horizon_ms: u64,
}

/// Four distinct unit curves of the default ring.
pub fn default_unit_curves() -> [Logistic; 4] {
    [
        Logistic { v_max: 3.60, k_slope: -0.90, delta_z0: 5.00, epsilon: 0.35 },
        Logistic { v_max: 3.52, k_slope: -0.86, delta_z0: 5.20, epsilon: 0.38 },
        Logistic { v_max: 3.68, k_slope: -0.94, delta_z0: 4.85, epsilon: 0.33 },
        Logistic { v_max: 3.56, k_slope: -0.88, delta_z0: 5.10, epsilon: 0.36 },
    ]
}

pub fn default_unit_calibrations() -> Vec<SensorCalibration> {
    default_unit_curves()
        .into_iter()
        .map(|c| SensorCalibration::with_default_thresholds(c).expect("default curves are valid"))
        .collect()
}

impl Scenario {
    /// Straight 100 mm segment, default ring on disk 3 of 5, no obstacles.
    pub fn baseline(noise: NoiseModel, seed: u64) -> Self {
        Self {
            segment_length: 100.0,
            geometry: SegmentGeometry::new(4.0, DEFAULT_CABLE_PHASE, 5).expect("valid geometry"),
            layout: RingLayout { mount_disk_index: 3, ..RingLayout::default() },
            calibrations: default_unit_calibrations(),
            noise,
            obstacles: Vec::new(),
            duration_ms: 1000.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            actuation: Vec::new(),
            seed,
            zones: ZoneThresholds::default(),
            filter: FilterConfig::default(),
            mocap_noise: None,
            max_range: DEFAULT_MAX_RANGE_MM,
            horizon_ms: DEFAULT_HORIZON_MS,
        }
    }

    /// Flat targets facing every unit, each closing on its unit along the
    /// boresight at `speed_mm_s` from `start_gap` to `end_gap`.
    pub fn approach(
        noise: NoiseModel,
        mocap_noise: Option<f64>,
        seed: u64,
        bend: Option<SegmentConfig>,
        start_gap: f64,
        end_gap: f64,
        speed_mm_s: f64,
    ) -> Result<Self, SimError> {
        let mut s = Self::baseline(noise, seed);
        s.mocap_noise = mocap_noise;
        let travel = start_gap - end_gap;
        s.duration_ms = travel / speed_mm_s * 1000.0;
        let cfg = match bend {
            Some(cfg) => {
                s.segment_length = cfg.length();
                let q = cables_from_config(&cfg, &s.geometry)?;
                s.actuation = vec![ActuationKey { t_ms: 0.0, q: q.lengths() }];
                // Use the configuration the pipeline will recover from the cables.
                config_from_cables(&q, &s.geometry, cfg.length())?
            }
            None => SegmentConfig::straight(s.segment_length)?,
        };
        let disk = disk_pose(s.layout.mount_disk_index, &cfg, &s.geometry)?;
        for unit in 0..s.layout.unit_count {
            let pose = sensor_world_pose(&disk, &s.layout, unit)?;
            let b = pose.x_axis();
            let start = pose.position + b * start_gap;
            let shift: Vector3<f64> = -b * travel;
            s.obstacles.push(Obstacle::moving(
                Shape::Plane { point: start.into(), normal: (-b).into() },
                vec![
                    Keyframe { t_ms: 0.0, offset: [0.0; 3] },
                    Keyframe { t_ms: s.duration_ms, offset: shift.into() },
                ],
            ));
        }
        Ok(s)
    }

    pub fn tick_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    pub fn tick_count(&self) -> usize {
        (self.duration_ms * self.sample_rate_hz / 1000.0).floor() as usize + 1
    }

    pub fn tick_time(&self, tick: usize) -> f64 {
        tick as f64 * self.tick_period_ms()
    }

    /// Cable lengths at `t_ms`.
    pub fn actuation_at(&self, t_ms: f64) -> [f64; 3] {
        let keys = &self.actuation;
        match keys.len() {
            0 => [self.segment_length; 3],
            _ if t_ms <= keys[0].t_ms => keys[0].q,
            n if t_ms >= keys[n - 1].t_ms => keys[n - 1].q,
            _ => {
                let i = keys.partition_point(|k| k.t_ms <= t_ms);
                let (a, b) = (&keys[i - 1], &keys[i]);
                let s = (t_ms - a.t_ms) / (b.t_ms - a.t_ms);
                std::array::from_fn(|j| a.q[j] + (b.q[j] - a.q[j]) * s)
            }
        }
    }

    /// Segment configuration recovered from the cables at `t_ms`.
    pub fn config_at(&self, t_ms: f64) -> Result<SegmentConfig, SimError> {
        let q = ActuationVector::new(self.actuation_at(t_ms))?;
        Ok(config_from_cables(&q, &self.geometry, self.segment_length)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::Invalid(m));
        if !(self.duration_ms > 0.0 && self.duration_ms.is_finite()) {
            return invalid(format!("duration must be positive, got {} ms", self.duration_ms));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return invalid(format!("sample rate must be positive, got {} Hz", self.sample_rate_hz));
        }
        if !(self.segment_length > 0.0 && self.segment_length.is_finite()) {
            return invalid(format!("segment length must be positive, got {}", self.segment_length));
        }
        if !(self.max_range > 0.0) {
            return invalid("max range must be positive".into());
        }
        self.layout.validate()?;
        if self.layout.mount_disk_index > self.geometry.disk_count() {
            return invalid(format!(
                "mount disk {} exceeds disk count {}",
                self.layout.mount_disk_index,
                self.geometry.disk_count()
            ));
        }
        if self.calibrations.len() != self.layout.unit_count {
            return invalid(format!(
                "{} calibrations for {} units",
                self.calibrations.len(),
                self.layout.unit_count
            ));
        }
        self.noise.validate()?;
        self.zones.validate()?;
        self.filter.validate()?;
        if let Some(m) = self.mocap_noise {
            if !(m >= 0.0 && m.is_finite()) {
                return invalid(format!("mocap noise must be non-negative, got {m}"));
            }
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        if self.actuation.windows(2).any(|w| !(w[1].t_ms > w[0].t_ms)) {
            return invalid("actuation timestamps must be strictly increasing".into());
        }
        // Every tick must map to a feasible configuration.
        for tick in 0..self.tick_count() {
            self.config_at(self.tick_time(tick))?;
        }
        Ok(())
    }
}
