//! Circumferential proximity perception for cable-driven continuum robots.
//!
//! The crate is organised along the data path of the perception stack:
//!
//! - [`pcc_kinematics`]: segment shape from cable lengths and per-disk poses.
//! - [`optical_model`]: logistic voltage/distance model and its calibration fit.
//! - [`signal_pipeline`]: per-channel IQR gating and moving-average smoothing.
//! - [`ring_mapping`]: sensing-ring geometry, gap estimation and the obstacle map.
//! - [`lumen_sim`]: ray-cast environment, reading synthesis and scenario runner.
//! - [`harness`]: file formats, the telemetry line codec and CLI commands.

pub mod harness;
pub mod lumen_sim;
pub mod optical_model;
pub mod pcc_kinematics;
pub mod ring_mapping;
pub mod signal_pipeline;

/// Full-scale ADC code of the 10-bit acquisition chain.
pub const ADC_MAX: u16 = 1023;
/// ADC reference voltage, V.
pub const ADC_REFERENCE_V: f64 = 5.0;

/// Volts per ADC count.
pub fn adc_step_volts() -> f64 {
    ADC_REFERENCE_V / ADC_MAX as f64
}

pub fn counts_to_volts(counts: f64) -> f64 {
    counts * adc_step_volts()
}

pub fn volts_to_counts(volts: f64) -> f64 {
    volts / adc_step_volts()
}
