//! Synthetic lumen environment and closed-loop scenario runner.
//!
//! Obstacles are parametric surfaces moving along piecewise-linear
//! trajectories. Each sensing unit's reading is synthesised from the exact
//! boresight distance through its calibration curve, a noise model and the
//! 10-bit ADC, then pushed through the same filtering, kinematics and mapping
//! path a deployed system would run. A simulated motion-capture reference
//! provides the ground truth the estimates are scored against.

pub mod environment;
pub mod mocap;
pub mod noise;
pub mod runner;
pub mod scenario;

use thiserror::Error;

pub use environment::{euclidean_distance, raycast_distance, Keyframe, Obstacle, Shape};
pub use mocap::{MocapReference, MOCAP_ACCURACY_MM, MOCAP_RATE_HZ};
pub use noise::{synthesize_reading, NoiseKind, NoiseModel, NoiseState};
pub use runner::{run_scenario, ChannelMetrics, LatencyStats, RunMetrics, RunOutput, TraceRecord, ZoneTransition};
pub use scenario::{default_unit_calibrations, default_unit_curves, ActuationKey, Scenario};

use crate::optical_model::OpticalError;
use crate::pcc_kinematics::KinematicsError;
use crate::ring_mapping::MapError;
use crate::signal_pipeline::SignalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Optical(#[from] OpticalError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Map(#[from] MapError),
}
