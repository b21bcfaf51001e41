//! Piecewise-constant-curvature kinematics of a single cable-driven segment.
//!
//! A segment is a circular arc described by its bending angle `theta`, the
//! bending-plane direction `phi` and its arc length. Three drive cables sit on
//! a pitch circle of radius `r`, separated by `cable_phase` (2π/3 by default).
//! Disks are spaced uniformly along the arc; disk `g` of `eta` sees the same
//! bending direction and a proportional share of bend and length.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this bending angle the closed-form arc expressions are replaced by
/// their Taylor expansions.
pub const SERIES_SWITCH_THETA: f64 = 1e-6;

/// Default angular separation of adjacent cables.
pub const DEFAULT_CABLE_PHASE: f64 = 2.0 * PI / 3.0;

// Rounding slack for the closed-form inverse (acos/atan2 landing just past π).
const ANGLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("bending angle {0} outside [0, π]")]
    BendOutOfRange(f64),
    #[error("bending direction {0} outside [-π, π]")]
    DirectionOutOfRange(f64),
    #[error("segment length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("cable radius must be positive and finite, got {0}")]
    BadCableRadius(f64),
    #[error("cable phase {0} outside (0, π]")]
    BadCablePhase(f64),
    #[error("disk count must be at least 1")]
    NoDisks,
    #[error("cable {index} has non-positive length {length} mm")]
    InfeasibleCable { index: usize, length: f64 },
    #[error("disk index {index} outside 1..={count}")]
    DiskOutOfRange { index: usize, count: usize },
}

/// Configuration of one constant-curvature segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    theta: f64,
    phi: f64,
    length: f64,
}

impl SegmentConfig {
    pub fn new(theta: f64, phi: f64, length: f64) -> Result<Self, KinematicsError> {
        if !(0.0..=PI).contains(&theta) {
            return Err(KinematicsError::BendOutOfRange(theta));
        }
        if !(-PI..=PI).contains(&phi) {
            return Err(KinematicsError::DirectionOutOfRange(phi));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(KinematicsError::BadLength(length));
        }
        Ok(Self { theta, phi, length })
    }

    /// A straight segment of the given length.
    pub fn straight(length: f64) -> Result<Self, KinematicsError> {
        Self::new(0.0, 0.0, length)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Bending radius `L/θ`; infinite for a straight segment.
    pub fn bending_radius(&self) -> f64 {
        if self.theta == 0.0 {
            f64::INFINITY
        } else {
            self.length / self.theta
        }
    }
}

/// Cable routing and disk subdivision of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentGeometry {
    cable_radius: f64,
    cable_phase: f64,
    disk_count: usize,
}

impl SegmentGeometry {
    pub fn new(cable_radius: f64, cable_phase: f64, disk_count: usize) -> Result<Self, KinematicsError> {
        if !(cable_radius > 0.0 && cable_radius.is_finite()) {
            return Err(KinematicsError::BadCableRadius(cable_radius));
        }
        if !(cable_phase > 0.0 && cable_phase <= PI) {
            return Err(KinematicsError::BadCablePhase(cable_phase));
        }
        if disk_count == 0 {
            return Err(KinematicsError::NoDisks);
        }
        Ok(Self {
            cable_radius,
            cable_phase,
            disk_count,
        })
    }

    pub fn cable_radius(&self) -> f64 {
        self.cable_radius
    }

    pub fn cable_phase(&self) -> f64 {
        self.cable_phase
    }

    pub fn disk_count(&self) -> usize {
        self.disk_count
    }
}

/// Lengths of the three drive cables, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuationVector([f64; 3]);

impl ActuationVector {
    pub fn new(q: [f64; 3]) -> Result<Self, KinematicsError> {
        for (index, &length) in q.iter().enumerate() {
            if !(length > 0.0 && length.is_finite()) {
                return Err(KinematicsError::InfeasibleCable { index, length });
            }
        }
        Ok(Self(q))
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.0
    }
}

/// Rigid transform taking local coordinates to the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Self { position, rotation }
    }

    /// `self ∘ local`: `local` expressed in `self`'s frame, mapped to the world.
    pub fn compose(&self, local: &Pose) -> Pose {
        Pose {
            position: self.position + self.rotation * local.position,
            rotation: self.rotation * local.rotation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.rotation * p
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.rotation.column(0).into_owned()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }
}

/// The five pose parameters of a disk plus its full pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPose {
    pub index: usize,
    pub pose: Pose,
    pub params: DiskParams,
    /// Arc length from the segment base to this disk.
    pub arc_length: f64,
}

// (1 - cos θ)/θ and sin θ/θ with a series switch near zero. 1 - cos θ is
// evaluated as 2 sin²(θ/2) to avoid cancellation just above the switch.
fn arc_factors(theta: f64) -> (f64, f64) {
    if theta < SERIES_SWITCH_THETA {
        let t2 = theta * theta;
        (theta / 2.0 - theta * t2 / 24.0, 1.0 - t2 / 6.0)
    } else {
        let half = (theta / 2.0).sin();
        (2.0 * half * half / theta, theta.sin() / theta)
    }
}

fn arc_position(theta: f64, phi: f64, length: f64) -> Vector3<f64> {
    let (lateral, axial) = arc_factors(theta);
    Vector3::new(
        length * lateral * phi.cos(),
        length * lateral * phi.sin(),
        length * axial,
    )
}

fn arc_rotation(theta: f64, phi: f64) -> Matrix3<f64> {
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), phi);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), theta);
    (rz * ry * rz.inverse()).into_inner()
}

/// Tip pose of a segment relative to its base.
///
/// The tip frame is `Rz(φ)·Ry(θ)·Rz(−φ)`, so its z-axis is tangent to the
/// backbone at the tip.
pub fn forward_segment_pose(cfg: &SegmentConfig) -> Pose {
    Pose {
        position: arc_position(cfg.theta, cfg.phi, cfg.length),
        rotation: arc_rotation(cfg.theta, cfg.phi),
    }
}

/// Tip poses of a chain of segments, each mounted on its predecessor's tip.
pub fn forward_chain(segments: &[SegmentConfig]) -> Vec<Pose> {
    let mut base = Pose::identity();
    segments
        .iter()
        .map(|cfg| {
            base = base.compose(&forward_segment_pose(cfg));
            base
        })
        .collect()
}

/// Cable lengths realising `cfg`: `q_i = L − r·θ·cos(φ + (i−1)ξ)`.
pub fn cables_from_config(cfg: &SegmentConfig, geom: &SegmentGeometry) -> Result<ActuationVector, KinematicsError> {
    let mut q = [0.0; 3];
    for (i, qi) in q.iter_mut().enumerate() {
        let angle = cfg.phi + i as f64 * geom.cable_phase;
        *qi = cfg.length - geom.cable_radius * cfg.theta * angle.cos();
    }
    ActuationVector::new(q)
}

/// Inverse of [`cables_from_config`] for three cables at 2π/3 spacing.
///
/// When all cables are equal the segment is straight and `phi` is reported as 0.
pub fn config_from_cables(q: &ActuationVector, geom: &SegmentGeometry, length: f64) -> Result<SegmentConfig, KinematicsError> {
    let [q1, q2, q3] = q.0;
    let radicand = q1 * q1 + q2 * q2 + q3 * q3 - q1 * q2 - q2 * q3 - q1 * q3;
    let y = 3f64.sqrt() * (q2 - q3);
    let x = q2 + q3 - 2.0 * q1;
    if radicand <= 0.0 || (x == 0.0 && y == 0.0) {
        return SegmentConfig::straight(length);
    }
    let theta = 2.0 * radicand.sqrt() / (3.0 * geom.cable_radius);
    let theta = if theta > PI && theta <= PI + ANGLE_SLACK { PI } else { theta };
    SegmentConfig::new(theta, y.atan2(x), length)
}

/// Pose of disk `g` (1-based) along the segment.
pub fn disk_pose(g: usize, cfg: &SegmentConfig, geom: &SegmentGeometry) -> Result<DiskPose, KinematicsError> {
    let count = geom.disk_count;
    if g == 0 || g > count {
        return Err(KinematicsError::DiskOutOfRange { index: g, count });
    }
    let fraction = g as f64 / count as f64;
    let sub = SegmentConfig {
        theta: fraction * cfg.theta,
        phi: cfg.phi,
        length: fraction * cfg.length,
    };
    let pose = forward_segment_pose(&sub);
    Ok(DiskPose {
        index: g,
        params: DiskParams {
            x: pose.position.x,
            y: pose.position.y,
            z: pose.position.z,
            theta: sub.theta,
            phi: sub.phi,
        },
        pose,
        arc_length: sub.length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geom() -> SegmentGeometry {
        SegmentGeometry::new(4.0, DEFAULT_CABLE_PHASE, 5).unwrap()
    }

    // Direct evaluation of the arc formula, kept separate from arc_factors.
    fn arc_oracle(theta: f64, phi: f64, l: f64) -> Vector3<f64> {
        let r = l / theta;
        Vector3::new(
            r * (1.0 - theta.cos()) * phi.cos(),
            r * (1.0 - theta.cos()) * phi.sin(),
            r * theta.sin(),
        )
    }

    #[test]
    fn quarter_bend_position() {
        let p = forward_segment_pose(&SegmentConfig::new(PI / 2.0, 0.0, 100.0).unwrap()).position;
        let expected = 200.0 / PI;
        assert_abs_diff_eq!(p.x, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(p.x, 63.662, epsilon = 5e-4);
        assert_abs_diff_eq!((p - arc_oracle(PI / 2.0, 0.0, 100.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn half_turn_position() {
        let p = forward_segment_pose(&SegmentConfig::new(PI, PI / 2.0, 100.0).unwrap()).position;
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 63.662, epsilon = 5e-4);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn straight_limit() {
        for theta in [0.0, 1e-12, 1e-8] {
            let p = forward_segment_pose(&SegmentConfig::new(theta, 1.3, 100.0).unwrap()).position;
            assert!((p - Vector3::new(0.0, 0.0, 100.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn series_matches_closed_form_at_switch() {
        let below = forward_segment_pose(&SegmentConfig::new(SERIES_SWITCH_THETA * 0.999_999, 0.4, 80.0).unwrap());
        let above = forward_segment_pose(&SegmentConfig::new(SERIES_SWITCH_THETA, 0.4, 80.0).unwrap());
        assert!((below.position - above.position).norm() < 1e-9);
    }

    #[test]
    fn tip_frame_is_tangent() {
        let (theta, phi) = (1.1, -0.7);
        let pose = forward_segment_pose(&SegmentConfig::new(theta, phi, 50.0).unwrap());
        let tangent = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        assert_abs_diff_eq!((pose.z_axis() - tangent).norm(), 0.0, epsilon = 1e-12);
        assert!(pose.orthonormality_error() < 1e-12);
        assert_abs_diff_eq!(pose.rotation.determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SegmentConfig::new(-0.1, 0.0, 1.0).is_err());
        assert!(SegmentConfig::new(3.2, 0.0, 1.0).is_err());
        assert!(SegmentConfig::new(0.1, 3.2, 1.0).is_err());
        assert!(SegmentConfig::new(0.1, 0.0, 0.0).is_err());
        assert!(SegmentGeometry::new(0.0, 1.0, 1).is_err());
        assert!(SegmentGeometry::new(1.0, 0.0, 1).is_err());
        assert!(SegmentGeometry::new(1.0, 1.0, 0).is_err());
        assert!(ActuationVector::new([1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn cables_for_straight_segment() {
        let q = cables_from_config(&SegmentConfig::straight(100.0).unwrap(), &geom()).unwrap();
        assert_eq!(q.lengths(), [100.0; 3]);
        let cfg = config_from_cables(&q, &geom(), 100.0).unwrap();
        assert_eq!((cfg.theta(), cfg.phi()), (0.0, 0.0));
    }

    #[test]
    fn cable_one_for_quarter_bend() {
        let q = cables_from_config(&SegmentConfig::new(PI / 2.0, 0.0, 100.0).unwrap(), &geom()).unwrap();
        assert_abs_diff_eq!(q.lengths()[0], 100.0 - 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(q.lengths()[0], 93.717, epsilon = 5e-4);
    }

    #[test]
    fn mean_cable_length_is_segment_length() {
        for &(theta, phi) in &[(0.3, 0.1), (2.0, -2.5), (PI, 1.0)] {
            let q = cables_from_config(&SegmentConfig::new(theta, phi, 100.0).unwrap(), &geom()).unwrap();
            let mean = q.lengths().iter().sum::<f64>() / 3.0;
            assert_abs_diff_eq!(mean, 100.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn equal_side_cables_give_zero_direction() {
        let q = ActuationVector::new([98.0, 101.0, 101.0]).unwrap();
        let cfg = config_from_cables(&q, &geom(), 100.0).unwrap();
        assert_eq!(cfg.phi(), 0.0);
        assert!(cfg.theta() > 0.0);
    }

    #[test]
    fn inverse_recovers_reference_config() {
        let cfg = SegmentConfig::new(PI / 3.0, PI / 6.0, 100.0).unwrap();
        let q = cables_from_config(&cfg, &geom()).unwrap();
        let back = config_from_cables(&q, &geom(), 100.0).unwrap();
        assert_abs_diff_eq!(back.theta(), PI / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back.phi(), PI / 6.0, epsilon = 1e-9);
    }

    #[test]
    fn radicand_identity() {
        let g = geom();
        for &(theta, phi) in &[(0.2, 0.0), (1.4, 2.0), (3.0, -1.2)] {
            let q = cables_from_config(&SegmentConfig::new(theta, phi, 100.0).unwrap(), &g).unwrap();
            let [a, b, c] = q.lengths();
            let lhs = a * a + b * b + c * c - a * b - b * c - a * c;
            let rhs = 2.25 * g.cable_radius().powi(2) * theta * theta;
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8 * rhs.max(1.0));
        }
    }

    #[test]
    fn infeasible_bend_rejected() {
        let g = SegmentGeometry::new(40.0, DEFAULT_CABLE_PHASE, 3).unwrap();
        let err = cables_from_config(&SegmentConfig::new(PI, 0.0, 100.0).unwrap(), &g).unwrap_err();
        assert!(matches!(err, KinematicsError::InfeasibleCable { index: 0, .. }));
    }

    #[test]
    fn last_disk_is_segment_tip() {
        let cfg = SegmentConfig::new(1.2, 0.5, 90.0).unwrap();
        let disk = disk_pose(5, &cfg, &geom()).unwrap();
        let tip = forward_segment_pose(&cfg);
        assert_eq!(disk.pose, tip);
        assert_eq!(disk.arc_length, 90.0);
    }

    #[test]
    fn disk_subdivision_params() {
        let cfg = SegmentConfig::new(PI / 2.0, 0.3, 100.0).unwrap();
        let disk = disk_pose(2, &cfg, &geom()).unwrap();
        assert_abs_diff_eq!(disk.params.theta, PI / 5.0, epsilon = 1e-12);
        assert_eq!(disk.params.phi, 0.3);
        assert_abs_diff_eq!(disk.arc_length, 40.0, epsilon = 1e-12);
        let straight = disk_pose(2, &SegmentConfig::straight(100.0).unwrap(), &geom()).unwrap();
        assert_abs_diff_eq!((straight.pose.position - Vector3::new(0.0, 0.0, 40.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn disk_index_bounds() {
        let cfg = SegmentConfig::straight(10.0).unwrap();
        assert!(disk_pose(0, &cfg, &geom()).is_err());
        assert!(disk_pose(6, &cfg, &geom()).is_err());
    }

    #[test]
    fn chord_lengths_converge_to_arc_length() {
        let cfg = SegmentConfig::new(2.5, -0.4, 100.0).unwrap();
        let chord_sum = |eta: usize| {
            let g = SegmentGeometry::new(4.0, DEFAULT_CABLE_PHASE, eta).unwrap();
            let mut prev = Vector3::zeros();
            let mut total = 0.0;
            for i in 1..=eta {
                let p = disk_pose(i, &cfg, &g).unwrap().pose.position;
                let chord = (p - prev).norm();
                assert!(chord > 0.0);
                total += chord;
                prev = p;
            }
            total
        };
        let coarse = chord_sum(4);
        let fine = chord_sum(400);
        assert!(coarse < fine && fine < 100.0);
        assert!(100.0 - fine < 1e-3);
    }

    #[test]
    fn chain_composes_tips() {
        let a = SegmentConfig::new(0.8, 0.2, 60.0).unwrap();
        let b = SegmentConfig::new(0.5, -1.0, 40.0).unwrap();
        let poses = forward_chain(&[a, b]);
        let expected = forward_segment_pose(&a).compose(&forward_segment_pose(&b));
        assert_eq!(poses[1], expected);
        assert!(poses[1].orthonormality_error() < 1e-12);
    }
}
