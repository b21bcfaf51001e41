//! Logistic voltage/distance model of an optoelectronic proximity unit.
//!
//! The phototransistor output follows `V(d) = v_max / (1 + exp(-k (d - d0))) + ε`.
//! Proximity shortens the optical path and raises the voltage, so physical
//! units are fitted with a negative `k`. Nothing here assumes a sign.

mod fit;

pub use fit::{fit_calibration, fit_calibration_with, CalibrationSample, FitOptions, FitReport, MAX_ITERATIONS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fraction of the peak slope used as the default sensitivity floor when
/// deriving the usable voltage interval.
pub const DEFAULT_SENSITIVITY_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticalError {
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("voltage {v} V outside the calibrated interval ({low}, {up})")]
    OutOfRange { v: f64, low: f64, up: f64 },
    #[error("voltage {v} V outside the logistic range ({lo}, {hi})")]
    Domain { v: f64, lo: f64, hi: f64 },
    #[error("sensitivity floor {floor} V/mm exceeds the peak slope {peak} V/mm")]
    NoValidInterval { floor: f64, peak: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate calibration data: {0}")]
    Degenerate(String),
    #[error("fit did not converge after {iterations} iterations (cost {cost:.3e}, damping {damping:.1e})")]
    NoConvergence { iterations: usize, cost: f64, damping: f64 },
}

/// The four-parameter logistic curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub v_max: f64,
    pub k_slope: f64,
    pub delta_z0: f64,
    pub epsilon: f64,
}

impl Logistic {
    pub fn new(v_max: f64, k_slope: f64, delta_z0: f64, epsilon: f64) -> Result<Self, OpticalError> {
        let curve = Self { v_max, k_slope, delta_z0, epsilon };
        curve.validate()?;
        Ok(curve)
    }

    fn validate(&self) -> Result<(), OpticalError> {
        let finite = [self.v_max, self.k_slope, self.delta_z0, self.epsilon]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(OpticalError::InvalidCalibration("non-finite parameter".into()));
        }
        if self.v_max <= 0.0 {
            return Err(OpticalError::InvalidCalibration(format!("v_max must be positive, got {}", self.v_max)));
        }
        if self.k_slope == 0.0 {
            return Err(OpticalError::InvalidCalibration("k_slope must be non-zero".into()));
        }
        Ok(())
    }

    /// Logistic fraction `1 / (1 + exp(-k (d - d0)))`.
    pub(crate) fn fraction(&self, delta_z: f64) -> f64 {
        1.0 / (1.0 + (-self.k_slope * (delta_z - self.delta_z0)).exp())
    }

    pub fn voltage(&self, delta_z: f64) -> f64 {
        self.v_max * self.fraction(delta_z) + self.epsilon
    }

    /// `dV/dΔZ`, V/mm.
    pub fn slope(&self, delta_z: f64) -> f64 {
        let s = self.fraction(delta_z);
        self.v_max * self.k_slope * s * (1.0 - s)
    }

    /// Largest `|dV/dΔZ|`, reached at `delta_z0`.
    pub fn peak_slope(&self) -> f64 {
        self.k_slope.abs() * self.v_max / 4.0
    }

    /// Voltage approached as the target recedes to infinity.
    pub fn far_field_voltage(&self) -> f64 {
        if self.k_slope < 0.0 {
            self.epsilon
        } else {
            self.v_max + self.epsilon
        }
    }

    /// Closed-form inverse on the open range `(ε, v_max + ε)`.
    pub fn distance(&self, v: f64) -> Result<f64, OpticalError> {
        let (lo, hi) = (self.epsilon, self.v_max + self.epsilon);
        if !(v > lo && v < hi) {
            return Err(OpticalError::Domain { v, lo, hi });
        }
        Ok(self.delta_z0 - (self.v_max / (v - self.epsilon) - 1.0).ln() / self.k_slope)
    }
}

/// Voltages bounding the interval where `|dV/dΔZ| >= sensitivity_floor`.
///
/// Returned as `(low, up)` with `low <= up`.
pub fn derive_thresholds(curve: &Logistic, sensitivity_floor: f64) -> Result<(f64, f64), OpticalError> {
    let peak = curve.peak_slope();
    if !(sensitivity_floor > 0.0) || sensitivity_floor > peak {
        return Err(OpticalError::NoValidInterval { floor: sensitivity_floor, peak });
    }
    // s(1 - s) = c with c <= 1/4; the small root is written cancellation-free.
    let c = sensitivity_floor / (curve.k_slope.abs() * curve.v_max);
    let disc = (1.0 - 4.0 * c).max(0.0).sqrt();
    let s_low = 2.0 * c / (1.0 + disc);
    let s_up = 1.0 - s_low;
    Ok((curve.v_max * s_low + curve.epsilon, curve.v_max * s_up + curve.epsilon))
}

/// Fitted curve of one sensing unit together with its usable interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorCalibration {
    pub curve: Logistic,
    pub threshold_low: f64,
    pub threshold_up: f64,
    /// Distance reported when the target is beyond the usable interval, mm.
    pub max_distance: f64,
}

impl SensorCalibration {
    pub fn new(curve: Logistic, threshold_low: f64, threshold_up: f64, max_distance: f64) -> Result<Self, OpticalError> {
        curve.validate()?;
        if !(threshold_low < threshold_up) {
            return Err(OpticalError::InvalidCalibration(format!(
                "threshold_low {threshold_low} must be below threshold_up {threshold_up}"
            )));
        }
        if !(max_distance > 0.0 && max_distance.is_finite()) {
            return Err(OpticalError::InvalidCalibration(format!("max_distance must be positive, got {max_distance}")));
        }
        Ok(Self { curve, threshold_low, threshold_up, max_distance })
    }

    /// Thresholds from a sensitivity floor; `max_distance` defaults to the
    /// distance at the far end of the usable interval.
    pub fn from_curve(curve: Logistic, sensitivity_floor: f64, max_distance: Option<f64>) -> Result<Self, OpticalError> {
        curve.validate()?;
        let (low, up) = derive_thresholds(&curve, sensitivity_floor)?;
        let far_voltage = if curve.k_slope < 0.0 { low } else { up };
        let max_distance = match max_distance {
            Some(d) => d,
            None => curve.distance(far_voltage)?,
        };
        Self::new(curve, low, up, max_distance)
    }

    /// [`Self::from_curve`] with the floor at [`DEFAULT_SENSITIVITY_FRACTION`] of the peak slope.
    pub fn with_default_thresholds(curve: Logistic) -> Result<Self, OpticalError> {
        Self::from_curve(curve, DEFAULT_SENSITIVITY_FRACTION * curve.peak_slope(), None)
    }

    /// Voltage at the near-saturation end of the usable interval.
    pub fn near_threshold(&self) -> f64 {
        if self.curve.k_slope < 0.0 {
            self.threshold_up
        } else {
            self.threshold_low
        }
    }

    /// Voltage at the far-saturation end of the usable interval.
    pub fn far_threshold(&self) -> f64 {
        if self.curve.k_slope < 0.0 {
            self.threshold_low
        } else {
            self.threshold_up
        }
    }
}

pub fn response_voltage(delta_z: f64, calib: &SensorCalibration) -> f64 {
    calib.curve.voltage(delta_z)
}

/// Distance for a voltage strictly inside `(threshold_low, threshold_up)`.
pub fn invert_voltage(v: f64, calib: &SensorCalibration) -> Result<f64, OpticalError> {
    if !(v > calib.threshold_low && v < calib.threshold_up) {
        return Err(OpticalError::OutOfRange {
            v,
            low: calib.threshold_low,
            up: calib.threshold_up,
        });
    }
    calib.curve.distance(v)
}
