use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::optical_model::SensorCalibration;
use crate::{volts_to_counts, ADC_MAX};

/// Stationary standard deviation of the AR(1) reading noise, ADC counts.
///
/// Together with [`PAPER_AR_COEFFICIENT`] this gives a raw reading variance
/// of about 1.38 counts² and about 0.35 counts² after the default gate and
/// ten-sample average.
pub const PAPER_SIGMA: f64 = 1.14;
pub const PAPER_AR_COEFFICIENT: f64 = 0.54;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    GaussianIid,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Marginal standard deviation, ADC counts.
    pub sigma: f64,
    #[serde(default)]
    pub ar_coefficient: f64,
    #[serde(default)]
    pub outlier_rate: f64,
    #[serde(default)]
    pub outlier_magnitude: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::GaussianIid,
            sigma: 0.0,
            ar_coefficient: 0.0,
            outlier_rate: 0.0,
            outlier_magnitude: 0.0,
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self { sigma, ..Self::none() }
    }

    /// AR(1) noise reproducing the static-position variance figures.
    pub fn paper_matched() -> Self {
        Self {
            kind: NoiseKind::Ar1,
            sigma: PAPER_SIGMA,
            ar_coefficient: PAPER_AR_COEFFICIENT,
            ..Self::none()
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { sigma: self.sigma * factor, ..*self }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SimError::Invalid(format!("noise sigma must be non-negative, got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return Err(SimError::Invalid(format!("AR coefficient {} outside [0, 1)", self.ar_coefficient)));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(SimError::Invalid(format!("outlier rate {} outside [0, 1)", self.outlier_rate)));
        }
        if !(self.outlier_magnitude >= 0.0 && self.outlier_magnitude.is_finite()) {
            return Err(SimError::Invalid("outlier magnitude must be non-negative".into()));
        }
        Ok(())
    }
}

/// Per-channel noise generator. Every sample consumes the same number of
/// random draws whatever the model parameters, so scaling sigma scales one
/// fixed noise path.
#[derive(Debug, Clone)]
pub struct NoiseState {
    rng: ChaCha8Rng,
    ar_state: Option<f64>,
}

impl NoiseState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, ar_state: None }
    }

    /// Next additive noise value, ADC counts.
    pub fn draw(&mut self, model: &NoiseModel) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        let u: f64 = self.rng.random();
        let sign_draw: bool = self.rng.random();
        let base = match model.kind {
            NoiseKind::GaussianIid => model.sigma * z,
            NoiseKind::Ar1 => {
                let a = model.ar_coefficient;
                let next = match self.ar_state {
                    // Start from the stationary distribution.
                    None => model.sigma * z,
                    Some(prev) => a * prev + model.sigma * (1.0 - a * a).sqrt() * z,
                };
                self.ar_state = Some(next);
                next
            }
        };
        let outlier = if u < model.outlier_rate {
            if sign_draw { model.outlier_magnitude } else { -model.outlier_magnitude }
        } else {
            0.0
        };
        base + outlier
    }
}

/// Round-to-nearest onto the 10-bit ADC grid.
pub fn quantize_counts(counts: f64) -> u16 {
    counts.round().clamp(0.0, ADC_MAX as f64) as u16
}

/// ADC reading for a true boresight distance; `None` is the far field.
pub fn synthesize_reading(
    true_distance: Option<f64>,
    calib: &SensorCalibration,
    noise: &NoiseModel,
    state: &mut NoiseState,
) -> u16 {
    let volts = match true_distance {
        Some(d) => calib.curve.voltage(d.max(0.0)),
        None => calib.curve.far_field_voltage(),
    };
    quantize_counts(volts_to_counts(volts) + state.draw(noise))
}
