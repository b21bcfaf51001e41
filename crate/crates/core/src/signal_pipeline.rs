//! Streaming per-channel preprocessing: IQR gating, moving average and SQI.
//!
//! Each incoming sample is tested against Tukey fences computed from the
//! current window before it is admitted, so a rejected spike never enters the
//! average. A rejected sample repeats the previous smoothed value, keeping the
//! output cadence equal to the input cadence.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_IQR_GATE_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("variance needs at least two values, got {0}")]
    UndefinedVariance(usize),
    #[error("windows must be non-empty and of equal length ({raw} vs {filtered})")]
    WindowMismatch { raw: usize, filtered: usize },
    #[error("channel {channel} outside 0..{count}")]
    UnknownChannel { channel: u8, count: usize },
    #[error("channel {channel}: timestamp {timestamp} ms precedes {previous} ms")]
    TimestampRegression { channel: u8, timestamp: u64, previous: u64 },
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub timestamp: u64,
    pub channel: u8,
    /// ADC counts.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredSample {
    pub timestamp: u64,
    pub channel: u8,
    /// Smoothed reading, ADC counts.
    pub value: f64,
    /// The raw sample that produced this output was rejected by the gate.
    pub rejected: bool,
    /// Mean timestamp of the samples averaged into `value`, ms.
    pub centroid_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub window: usize,
    pub iqr_gate_factor: f64,
    /// Lower bound on the IQR used for the fences. Quantized signals often
    /// have a zero IQR, which would otherwise reject every one-count step.
    pub min_iqr: f64,
    /// The gate is bypassed until the window holds this many samples.
    pub min_gate_len: usize,
    /// This many consecutive rejections are treated as a level shift and the
    /// window is rebuilt from them.
    pub reacquire_after: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            iqr_gate_factor: DEFAULT_IQR_GATE_FACTOR,
            min_iqr: 1.0,
            min_gate_len: DEFAULT_WINDOW,
            reacquire_after: DEFAULT_WINDOW / 2,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.window == 0 {
            return Err(SignalError::InvalidConfig("window must be at least 1".into()));
        }
        if !(self.iqr_gate_factor >= 0.0) || !(self.min_iqr >= 0.0) {
            return Err(SignalError::InvalidConfig("gate factor and IQR floor must be non-negative".into()));
        }
        if self.reacquire_after == 0 {
            return Err(SignalError::InvalidConfig("reacquire_after must be at least 1".into()));
        }
        Ok(())
    }
}

/// Gate and smoothing state of one channel.
#[derive(Debug, Clone)]
pub struct FilterState {
    config: FilterConfig,
    window: VecDeque<(u64, f64)>,
    rejected_run: VecDeque<(u64, f64)>,
    last: Option<(f64, f64)>,
}

impl FilterState {
    pub fn new(config: FilterConfig) -> Self {
        Self {
            config,
            window: VecDeque::with_capacity(config.window),
            rejected_run: VecDeque::new(),
            last: None,
        }
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn window_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().map(|&(_, v)| v)
    }

    /// Tukey fences of the current window, if the gate is active.
    pub fn fences(&self) -> Option<(f64, f64)> {
        if self.window.len() < self.config.min_gate_len.max(1) {
            return None;
        }
        let mut sorted: Vec<f64> = self.window_values().collect();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = (q3 - q1).max(self.config.min_iqr);
        let f = self.config.iqr_gate_factor;
        Some((q1 - f * iqr, q3 + f * iqr))
    }

    pub fn push_sample(&mut self, s: RawSample) -> FilteredSample {
        let admitted = match self.fences() {
            Some((lo, hi)) => s.value >= lo && s.value <= hi,
            None => true,
        };
        let rejected = if admitted {
            self.rejected_run.clear();
            self.admit(s.timestamp, s.value);
            false
        } else {
            self.rejected_run.push_back((s.timestamp, s.value));
            if self.rejected_run.len() >= self.config.reacquire_after {
                self.window.clear();
                for (t, v) in std::mem::take(&mut self.rejected_run) {
                    self.admit(t, v);
                }
                false
            } else {
                true
            }
        };
        if !rejected {
            let n = self.window.len() as f64;
            let value = self.window.iter().map(|&(_, v)| v).sum::<f64>() / n;
            let centroid = self.window.iter().map(|&(t, _)| t as f64).sum::<f64>() / n;
            self.last = Some((value, centroid));
        }
        let (value, centroid_ms) = self.last.unwrap_or((s.value, s.timestamp as f64));
        FilteredSample {
            timestamp: s.timestamp,
            channel: s.channel,
            value,
            rejected,
            centroid_ms,
        }
    }

    fn admit(&mut self, t: u64, v: f64) {
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back((t, v));
    }
}

/// One [`FilterState`] per channel with input validation.
#[derive(Debug, Clone)]
pub struct FilterBank {
    channels: Vec<FilterState>,
    last_timestamp: Vec<Option<u64>>,
}

impl FilterBank {
    pub fn new(channel_count: usize, config: FilterConfig) -> Result<Self, SignalError> {
        config.validate()?;
        Ok(Self {
            channels: (0..channel_count).map(|_| FilterState::new(config)).collect(),
            last_timestamp: vec![None; channel_count],
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn push(&mut self, s: RawSample) -> Result<FilteredSample, SignalError> {
        let idx = s.channel as usize;
        let count = self.channels.len();
        let state = self
            .channels
            .get_mut(idx)
            .ok_or(SignalError::UnknownChannel { channel: s.channel, count })?;
        if let Some(previous) = self.last_timestamp[idx] {
            if s.timestamp < previous {
                return Err(SignalError::TimestampRegression {
                    channel: s.channel,
                    timestamp: s.timestamp,
                    previous,
                });
            }
        }
        self.last_timestamp[idx] = Some(s.timestamp);
        Ok(state.push_sample(s))
    }
}

/// Linear interpolation between order statistics at `(n - 1)·p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Unbiased sample variance.
pub fn variance(window: &[f64]) -> Result<f64, SignalError> {
    let n = window.len();
    if n < 2 {
        return Err(SignalError::UndefinedVariance(n));
    }
    let mean = window.iter().sum::<f64>() / n as f64;
    Ok(window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
}

fn mean_and_detrended_sd(window: &[f64]) -> (f64, f64) {
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    let t_mean = (n - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in window.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss: f64 = window
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - mean - slope * (i as f64 - t_mean)).powi(2))
        .sum();
    (mean, (ss / n).sqrt())
}

/// `1 − sd/(|mean| + sd)` of the linearly detrended window.
pub fn sqi(window: &[f64]) -> f64 {
    if window.is_empty() {
        return 1.0;
    }
    let (mean, sd) = mean_and_detrended_sd(window);
    let denom = mean.abs() + sd;
    if denom == 0.0 {
        1.0
    } else {
        1.0 - sd / denom
    }
}

/// SQI of both windows and the relative improvement `SQI(filtered)/SQI(raw) − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub raw: f64,
    pub filtered: f64,
    pub improvement: f64,
}

pub fn signal_quality_index(raw: &[f64], filtered: &[f64]) -> Result<QualityReport, SignalError> {
    if raw.is_empty() || raw.len() != filtered.len() {
        return Err(SignalError::WindowMismatch {
            raw: raw.len(),
            filtered: filtered.len(),
        });
    }
    let (r, f) = (sqi(raw), sqi(filtered));
    let improvement = if r == 0.0 {
        if f == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        f / r - 1.0
    };
    Ok(QualityReport { raw: r, filtered: f, improvement })
}
