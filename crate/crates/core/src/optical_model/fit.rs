//! Levenberg–Marquardt fit of the logistic curve to distance/voltage samples.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::{Logistic, OpticalError, SensorCalibration, DEFAULT_SENSITIVITY_FRACTION};

pub const MAX_ITERATIONS: usize = 200;
const MIN_SAMPLES: usize = 8;
const STEP_TOLERANCE: f64 = 1e-10;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e16;

/// One distance/voltage pair from the calibration stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub distance: f64,
    pub voltage: f64,
}

impl CalibrationSample {
    pub fn new(distance: f64, voltage: f64) -> Self {
        Self { distance, voltage }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Absolute floor in V/mm; `None` uses a fraction of the fitted peak slope.
    pub sensitivity_floor: Option<f64>,
    pub max_distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub calibration: SensorCalibration,
    pub r_squared: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

pub fn fit_calibration(samples: &[CalibrationSample], init: Option<Logistic>) -> Result<FitReport, OpticalError> {
    fit_calibration_with(samples, init, &FitOptions::default())
}

pub fn fit_calibration_with(
    samples: &[CalibrationSample],
    init: Option<Logistic>,
    options: &FitOptions,
) -> Result<FitReport, OpticalError> {
    if samples.len() < MIN_SAMPLES {
        return Err(OpticalError::TooFewSamples { needed: MIN_SAMPLES, got: samples.len() });
    }
    if samples.iter().any(|s| !s.distance.is_finite() || !s.voltage.is_finite()) {
        return Err(OpticalError::Degenerate("non-finite sample".into()));
    }
    let seed = match init {
        Some(curve) => curve,
        None => initial_guess(samples)?,
    };
    let (params, iterations) = levenberg_marquardt(samples, params_of(&seed))?;
    let curve = canonical(params)?;

    let mean = samples.iter().map(|s| s.voltage).sum::<f64>() / samples.len() as f64;
    let ss_tot: f64 = samples.iter().map(|s| (s.voltage - mean).powi(2)).sum();
    let ss_res: f64 = samples.iter().map(|s| (curve.voltage(s.distance) - s.voltage).powi(2)).sum();
    let floor = options
        .sensitivity_floor
        .unwrap_or(DEFAULT_SENSITIVITY_FRACTION * curve.peak_slope());
    let calibration = SensorCalibration::from_curve(curve, floor, options.max_distance)?;

    Ok(FitReport {
        calibration,
        r_squared: 1.0 - ss_res / ss_tot,
        residual_rms: (ss_res / samples.len() as f64).sqrt(),
        iterations,
    })
}

fn params_of(c: &Logistic) -> Vector4<f64> {
    Vector4::new(c.v_max, c.k_slope, c.delta_z0, c.epsilon)
}

// (v_max, k, d0, ε) and (-v_max, -k, d0, ε + v_max) describe the same curve.
fn canonical(p: Vector4<f64>) -> Result<Logistic, OpticalError> {
    if p[0] < 0.0 {
        Logistic::new(-p[0], -p[1], p[2], p[3] + p[0])
    } else {
        Logistic::new(p[0], p[1], p[2], p[3])
    }
}

fn initial_guess(samples: &[CalibrationSample]) -> Result<Logistic, OpticalError> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.distance.total_cmp(&b.distance));

    let (v_min, v_hi) = sorted
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.voltage), hi.max(s.voltage)));
    let span = v_hi - v_min;
    if !(span > 0.0) {
        return Err(OpticalError::Degenerate("voltage is constant across samples".into()));
    }
    if sorted.first().map(|s| s.distance) == sorted.last().map(|s| s.distance) {
        return Err(OpticalError::Degenerate("all samples at one distance".into()));
    }

    let mid = 0.5 * (v_min + v_hi);
    let delta_z0 = sorted
        .iter()
        .min_by(|a, b| (a.voltage - mid).abs().total_cmp(&(b.voltage - mid).abs()))
        .map(|s| s.distance)
        .unwrap_or(0.0);

    // Trend sign from the least-squares line through the samples.
    let n = sorted.len() as f64;
    let mean_d = sorted.iter().map(|s| s.distance).sum::<f64>() / n;
    let mean_v = sorted.iter().map(|s| s.voltage).sum::<f64>() / n;
    let cov: f64 = sorted.iter().map(|s| (s.distance - mean_d) * (s.voltage - mean_v)).sum();
    let sign = if cov < 0.0 { -1.0 } else { 1.0 };

    let peak = sorted
        .windows(3)
        .filter(|w| w[2].distance > w[0].distance)
        .map(|w| ((w[2].voltage - w[0].voltage) / (w[2].distance - w[0].distance)).abs())
        .fold(0.0, f64::max);
    let magnitude = if peak > 0.0 { 4.0 * peak / span } else { 1.0 };

    Ok(Logistic {
        v_max: span,
        k_slope: sign * magnitude,
        delta_z0,
        epsilon: v_min,
    })
}

fn residuals_and_jacobian(samples: &[CalibrationSample], p: &Vector4<f64>) -> (f64, Matrix4<f64>, Vector4<f64>) {
    let (v_max, k, d0) = (p[0], p[1], p[2]);
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    let mut cost = 0.0;
    for s in samples {
        let x = s.distance - d0;
        let f = 1.0 / (1.0 + (-k * x).exp());
        let r = v_max * f + p[3] - s.voltage;
        let df = f * (1.0 - f);
        let row = Vector4::new(f, v_max * df * x, -v_max * df * k, 1.0);
        jtj += row * row.transpose();
        jtr += row * r;
        cost += r * r;
    }
    (cost, jtj, jtr)
}

fn cost_of(samples: &[CalibrationSample], p: &Vector4<f64>) -> f64 {
    samples
        .iter()
        .map(|s| {
            let r = p[0] / (1.0 + (-p[1] * (s.distance - p[2])).exp()) + p[3] - s.voltage;
            r * r
        })
        .sum()
}

fn levenberg_marquardt(samples: &[CalibrationSample], mut p: Vector4<f64>) -> Result<(Vector4<f64>, usize), OpticalError> {
    let mut damping = INITIAL_DAMPING;
    let (mut cost, mut jtj, mut jtr) = residuals_and_jacobian(samples, &p);
    for iteration in 1..=MAX_ITERATIONS {
        if cost == 0.0 {
            return Ok((p, iteration - 1));
        }
        loop {
            let mut lhs = jtj;
            for i in 0..4 {
                lhs[(i, i)] += damping * jtj[(i, i)].max(f64::MIN_POSITIVE);
            }
            let step = lhs.cholesky().map(|c| c.solve(&-jtr));
            let Some(step) = step else {
                damping *= 10.0;
                if damping > MAX_DAMPING {
                    return Ok((p, iteration));
                }
                continue;
            };
            let trial = p + step;
            let trial_cost = cost_of(samples, &trial);
            if trial_cost.is_finite() && trial_cost < cost {
                p = trial;
                damping = (damping / 10.0).max(1e-12);
                (cost, jtj, jtr) = residuals_and_jacobian(samples, &p);
                if step.norm() <= STEP_TOLERANCE * (p.norm() + STEP_TOLERANCE) {
                    return Ok((p, iteration));
                }
                break;
            }
            damping *= 10.0;
            if damping > MAX_DAMPING {
                // No representable descent direction left: numerically at the minimum.
                return Ok((p, iteration));
            }
        }
    }
    Err(OpticalError::NoConvergence {
        iterations: MAX_ITERATIONS,
        cost,
        damping,
    })
}
