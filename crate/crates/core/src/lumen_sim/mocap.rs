//! Simulated optical motion-capture reference.
//!
//! The reference system samples on its own 180 Hz grid with bounded uniform
//! error; pipeline ticks are paired with the nearest reference sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MOCAP_RATE_HZ: f64 = 180.0;
/// Accuracy bound of the reference system, mm.
pub const MOCAP_ACCURACY_MM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MocapReference {
    noise_mm: Option<f64>,
    seed: u64,
}

/// A reference sample paired with a pipeline timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub grid_time_ms: f64,
    pub distance: Option<f64>,
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl MocapReference {
    pub fn new(noise_mm: Option<f64>, seed: u64) -> Self {
        Self { noise_mm, seed }
    }

    pub fn period_ms() -> f64 {
        1000.0 / MOCAP_RATE_HZ
    }

    pub fn grid_index(t_ms: f64) -> i64 {
        (t_ms / Self::period_ms()).round() as i64
    }

    pub fn grid_time(index: i64) -> f64 {
        index as f64 * Self::period_ms()
    }

    /// Reference distance nearest in time to `t_ms`. `truth` evaluates the
    /// exact distance at an arbitrary time.
    pub fn sample(&self, channel: u8, t_ms: f64, truth: impl FnOnce(f64) -> Option<f64>) -> ReferenceSample {
        let index = Self::grid_index(t_ms);
        let grid_time_ms = Self::grid_time(index);
        let distance = truth(grid_time_ms).map(|d| d + self.perturbation(channel, index));
        ReferenceSample { grid_time_ms, distance }
    }

    // Deterministic per (seed, channel, grid index), so the same reference
    // sample is returned however often it is queried.
    fn perturbation(&self, channel: u8, index: i64) -> f64 {
        match self.noise_mm {
            None => 0.0,
            Some(bound) if bound <= 0.0 => 0.0,
            Some(bound) => {
                let key = mix(self.seed ^ mix(((channel as u64) << 48) ^ (index as u64)));
                let mut rng = ChaCha8Rng::seed_from_u64(key);
                rng.random_range(-bound..=bound)
            }
        }
    }
}
