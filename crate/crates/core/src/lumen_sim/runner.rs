use std::time::Instant;

use serde::Serialize;

use super::environment::{euclidean_distance, raycast_distance};
use super::mocap::MocapReference;
use super::noise::{synthesize_reading, NoiseState};
use super::scenario::Scenario;
use super::SimError;
use crate::counts_to_volts;
use crate::pcc_kinematics::{disk_pose, Pose};
use crate::ring_mapping::{
    reading_to_gap, sensor_world_pose, update_map_with_horizon, GapEstimate, GapStatus, ObstacleMap, Zone,
};
use crate::signal_pipeline::{FilterBank, RawSample};

/// One channel of one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t_ms: u64,
    pub channel: u8,
    pub raw_counts: u16,
    pub filtered_counts: f64,
    pub rejected: bool,
    pub voltage: f64,
    pub estimate: f64,
    pub status: GapStatus,
    pub zone: Zone,
    /// Exact boresight distance at the tick.
    pub ray_distance: Option<f64>,
    /// Exact minimum Euclidean distance at the tick.
    pub euclidean_distance: Option<f64>,
    /// Reference distance paired with the filter's sample centroid.
    pub reference: Option<f64>,
    /// Reference distance paired with the tick time itself.
    pub reference_at_tick: Option<f64>,
}

impl TraceRecord {
    pub fn error(&self) -> Option<f64> {
        match (self.status, self.reference) {
            (GapStatus::InRange, Some(r)) => Some(self.estimate - r),
            _ => None,
        }
    }

    fn error_at_tick(&self) -> Option<f64> {
        match (self.status, self.reference_at_tick) {
            (GapStatus::InRange, Some(r)) => Some(self.estimate - r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelMetrics {
    pub channel: u8,
    pub in_range_ticks: usize,
    /// `None` when the channel never produced an in-range estimate.
    pub rmse: Option<f64>,
    pub max_abs_error: Option<f64>,
    /// RMSE against the reference at the tick time, without compensating the
    /// averaging delay.
    pub rmse_at_tick: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub ticks: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self { ticks: 0, median_ms: 0.0, p95_ms: 0.0, max_ms: 0.0 };
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let at = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
        Self {
            ticks: sorted.len(),
            median_ms: at(0.5),
            p95_ms: at(0.95),
            max_ms: *sorted.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZoneTransition {
    pub t_ms: u64,
    pub channel: u8,
    pub from: Option<Zone>,
    pub to: Zone,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub channels: Vec<ChannelMetrics>,
    /// Over all channels' in-range ticks.
    pub overall_rmse: Option<f64>,
    pub latency: LatencyStats,
    pub zone_transitions: Vec<ZoneTransition>,
}

impl RunMetrics {
    pub fn max_channel_rmse(&self) -> Option<f64> {
        self.channels.iter().filter_map(|c| c.rmse).reduce(f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    /// Tick-major, channel-minor.
    pub trace: Vec<TraceRecord>,
    pub latencies_ms: Vec<f64>,
    pub final_map: ObstacleMap,
}

fn rms(errors: &[f64]) -> Option<f64> {
    (!errors.is_empty()).then(|| (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

pub fn compute_metrics(trace: &[TraceRecord], channel_count: usize, latencies_ms: &[f64]) -> RunMetrics {
    let mut channels = Vec::with_capacity(channel_count);
    let mut all = Vec::new();
    for ch in 0..channel_count as u8 {
        let records = trace.iter().filter(|r| r.channel == ch);
        let errors: Vec<f64> = records.clone().filter_map(|r| r.error()).collect();
        let at_tick: Vec<f64> = records.filter_map(|r| r.error_at_tick()).collect();
        all.extend_from_slice(&errors);
        channels.push(ChannelMetrics {
            channel: ch,
            in_range_ticks: errors.len(),
            rmse: rms(&errors),
            max_abs_error: errors.iter().map(|e| e.abs()).reduce(f64::max),
            rmse_at_tick: rms(&at_tick),
        });
    }

    let mut zone_transitions = Vec::new();
    let mut current: Vec<Option<Zone>> = vec![None; channel_count];
    for r in trace {
        let slot = &mut current[r.channel as usize];
        if *slot != Some(r.zone) {
            zone_transitions.push(ZoneTransition { t_ms: r.t_ms, channel: r.channel, from: *slot, to: r.zone });
            *slot = Some(r.zone);
        }
    }

    RunMetrics {
        channels,
        overall_rmse: rms(&all),
        latency: LatencyStats::from_samples(latencies_ms),
        zone_transitions,
    }
}

/// Ground-truth sensor poses from the scenario's own kinematics.
fn sensor_poses_at(s: &Scenario, t_ms: f64) -> Result<Vec<Pose>, SimError> {
    let cfg = s.config_at(t_ms)?;
    let disk = disk_pose(s.layout.mount_disk_index, &cfg, &s.geometry)?;
    (0..s.layout.unit_count)
        .map(|u| sensor_world_pose(&disk, &s.layout, u).map_err(SimError::from))
        .collect()
}

fn truth_at(s: &Scenario, unit: usize, t_ms: f64) -> Option<f64> {
    let poses = sensor_poses_at(s, t_ms).ok()?;
    raycast_distance(&poses[unit], &s.obstacles, t_ms, s.max_range)
}

/// Run a scenario tick by tick.
///
/// Per tick: synthesise readings from the true geometry (untimed), then run
/// filtering, kinematics, gap estimation and the map update (timed), then
/// score against the reference.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput, SimError> {
    s.validate()?;
    let units = s.layout.unit_count;
    let mut noise: Vec<NoiseState> = (0..units).map(|u| NoiseState::new(s.seed, u as u64 + 1)).collect();
    let mocap = MocapReference::new(s.mocap_noise, s.seed ^ 0x6d6f_6361_7000);
    let mut bank = FilterBank::new(units, s.filter)?;
    let mut map = ObstacleMap::default();
    let ticks = s.tick_count();
    let mut trace = Vec::with_capacity(ticks * units);
    let mut latencies = Vec::with_capacity(ticks);

    for tick in 0..ticks {
        let t = s.tick_time(tick);
        let stamp = t.round() as u64;

        let true_poses = sensor_poses_at(s, t)?;
        let mut raw = Vec::with_capacity(units);
        let mut rays = Vec::with_capacity(units);
        for (u, pose) in true_poses.iter().enumerate() {
            let ray = raycast_distance(pose, &s.obstacles, t, s.max_range);
            raw.push(synthesize_reading(ray, &s.calibrations[u], &s.noise, &mut noise[u]));
            rays.push((ray, euclidean_distance(pose, &s.obstacles, t)));
        }

        let started = Instant::now();
        let mut filtered = Vec::with_capacity(units);
        let mut gaps: Vec<GapEstimate> = Vec::with_capacity(units);
        for (u, &counts) in raw.iter().enumerate() {
            let f = bank.push(RawSample { timestamp: stamp, channel: u as u8, value: counts as f64 })?;
            gaps.push(reading_to_gap(counts_to_volts(f.value), &s.calibrations[u], u as u8, stamp)?);
            filtered.push(f);
        }
        let cfg = s.config_at(t)?;
        let disk = disk_pose(s.layout.mount_disk_index, &cfg, &s.geometry)?;
        let poses = (0..units)
            .map(|u| sensor_world_pose(&disk, &s.layout, u))
            .collect::<Result<Vec<_>, _>>()?;
        map = update_map_with_horizon(&gaps, &poses, &s.zones, &map, s.horizon_ms)?;
        latencies.push(started.elapsed().as_secs_f64() * 1e3);

        for u in 0..units {
            let f = &filtered[u];
            let gap = &gaps[u];
            let reference = mocap.sample(u as u8, f.centroid_ms, |tg| truth_at(s, u, tg)).distance;
            let reference_at_tick = mocap.sample(u as u8, t, |tg| truth_at(s, u, tg)).distance;
            trace.push(TraceRecord {
                t_ms: stamp,
                channel: u as u8,
                raw_counts: raw[u],
                filtered_counts: f.value,
                rejected: f.rejected,
                voltage: counts_to_volts(f.value),
                estimate: gap.distance,
                status: gap.status,
                zone: map.zone(u as u8).unwrap_or(Zone::Safe),
                ray_distance: rays[u].0,
                euclidean_distance: rays[u].1,
                reference,
                reference_at_tick,
            });
        }
    }

    let metrics = compute_metrics(&trace, units, &latencies);
    Ok(RunOutput { metrics, trace, latencies_ms: latencies, final_map: map })
}
