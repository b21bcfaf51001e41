use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::pcc_kinematics::Pose;

const PARALLEL_EPS: f64 = 1e-12;
const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Plane { point: [f64; 3], normal: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    Cylinder { point: [f64; 3], direction: [f64; 3], radius: f64 },
}

/// Translation of an obstacle at a point in time; interpolated linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t_ms: f64,
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub shape: Shape,
    #[serde(default)]
    pub trajectory: Vec<Keyframe>,
}

fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn check_unit(name: &str, v: [f64; 3]) -> Result<(), SimError> {
    let n = v3(v).norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(SimError::Invalid(format!("{name} must be unit length, got norm {n}")));
    }
    Ok(())
}

impl Obstacle {
    pub fn fixed(shape: Shape) -> Self {
        Self { shape, trajectory: Vec::new() }
    }

    pub fn moving(shape: Shape, trajectory: Vec<Keyframe>) -> Self {
        Self { shape, trajectory }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self.shape {
            Shape::Plane { normal, .. } => check_unit("plane normal", normal)?,
            Shape::Sphere { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(SimError::Invalid(format!("sphere radius must be positive, got {radius}")));
                }
            }
            Shape::Cylinder { direction, radius, .. } => {
                check_unit("cylinder direction", direction)?;
                if !(radius > 0.0) {
                    return Err(SimError::Invalid(format!("cylinder radius must be positive, got {radius}")));
                }
            }
        }
        if self.trajectory.windows(2).any(|w| !(w[1].t_ms > w[0].t_ms)) {
            return Err(SimError::Invalid("trajectory timestamps must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn offset_at(&self, t_ms: f64) -> Vector3<f64> {
        let keys = &self.trajectory;
        match keys.len() {
            0 => Vector3::zeros(),
            _ if t_ms <= keys[0].t_ms => v3(keys[0].offset),
            n if t_ms >= keys[n - 1].t_ms => v3(keys[n - 1].offset),
            _ => {
                let i = keys.partition_point(|k| k.t_ms <= t_ms);
                let (a, b) = (&keys[i - 1], &keys[i]);
                let s = (t_ms - a.t_ms) / (b.t_ms - a.t_ms);
                v3(a.offset) + (v3(b.offset) - v3(a.offset)) * s
            }
        }
    }

    /// Smallest non-negative ray parameter to this obstacle's surface at `t_ms`.
    pub fn ray_hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, t_ms: f64) -> Option<f64> {
        let shift = self.offset_at(t_ms);
        match self.shape {
            Shape::Plane { point, normal } => {
                let n = v3(normal);
                let denom = n.dot(dir);
                if denom.abs() < PARALLEL_EPS {
                    return None;
                }
                let t = n.dot(&(v3(point) + shift - origin)) / denom;
                (t >= 0.0).then_some(t)
            }
            Shape::Sphere { center, radius } => {
                let oc = origin - (v3(center) + shift);
                let h = dir.dot(&oc);
                let c = oc.dot(&oc) - radius * radius;
                smallest_root(dir.dot(dir), 2.0 * h, c)
            }
            Shape::Cylinder { point, direction, radius } => {
                let u = v3(direction);
                let w = origin - (v3(point) + shift);
                let d_perp = dir - u * u.dot(dir);
                let w_perp = w - u * u.dot(&w);
                smallest_root(d_perp.dot(&d_perp), 2.0 * d_perp.dot(&w_perp), w_perp.dot(&w_perp) - radius * radius)
            }
        }
    }

    /// Minimum Euclidean distance from `p` to the surface at `t_ms`.
    pub fn surface_distance(&self, p: &Vector3<f64>, t_ms: f64) -> f64 {
        let shift = self.offset_at(t_ms);
        match self.shape {
            Shape::Plane { point, normal } => v3(normal).dot(&(p - v3(point) - shift)).abs(),
            Shape::Sphere { center, radius } => ((p - v3(center) - shift).norm() - radius).abs(),
            Shape::Cylinder { point, direction, radius } => {
                let u = v3(direction);
                let w = p - v3(point) - shift;
                ((w - u * u.dot(&w)).norm() - radius).abs()
            }
        }
    }
}

// Smallest non-negative root of a·t² + b·t + c.
fn smallest_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if a < PARALLEL_EPS {
        return None;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if lo >= 0.0 {
        Some(lo)
    } else if hi >= 0.0 {
        Some(hi)
    } else {
        None
    }
}

/// Boresight distance from a sensor to the nearest obstacle, if any is hit
/// within `max_range`.
pub fn raycast_distance(sensor: &Pose, obstacles: &[Obstacle], t_ms: f64, max_range: f64) -> Option<f64> {
    let dir = sensor.x_axis();
    obstacles
        .iter()
        .filter_map(|o| o.ray_hit(&sensor.position, &dir, t_ms))
        .filter(|&d| d <= max_range)
        .min_by(f64::total_cmp)
}

/// Minimum Euclidean distance from the sensor origin to any obstacle.
pub fn euclidean_distance(sensor: &Pose, obstacles: &[Obstacle], t_ms: f64) -> Option<f64> {
    obstacles
        .iter()
        .map(|o| o.surface_distance(&sensor.position, t_ms))
        .min_by(f64::total_cmp)
}
