#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use circumsense::lumen_sim::{synthesize_reading, NoiseModel, NoiseState};
use circumsense::optical_model::SensorCalibration;
use circumsense::pcc_kinematics::{disk_pose, Pose, SegmentConfig, SegmentGeometry};
use circumsense::ring_mapping::{
    classify_zone, sensor_world_pose, update_map_with_horizon, ChannelState, GapEstimate, GapStatus, ObstacleMap,
    ObstaclePoint, Plane, RingLayout, Zone, ZoneThresholds,
};
use circumsense::signal_pipeline::{variance, FilterConfig, FilterState, RawSample};

pub type Tick = (Vec<GapEstimate>, Vec<Pose>);

pub struct MapInstance {
    pub ticks: Vec<Tick>,
    pub zones: ZoneThresholds,
    pub horizon_ms: u64,
}

pub fn random_map_instance(rng: &mut ChaCha8Rng) -> MapInstance {
    let units = rng.random_range(1..=6usize);
    let layout = RingLayout { unit_count: units, ..RingLayout::default() };
    let geom = SegmentGeometry::new(4.0, 2.0 * std::f64::consts::PI / 3.0, 5).unwrap();
    let d_intrude = rng.random_range(0.5..4.0);
    let zones = ZoneThresholds::new(d_intrude + rng.random_range(0.5..8.0), d_intrude).unwrap();
    let horizon_ms = rng.random_range(1..=300u64);
    let mut t = rng.random_range(0..100u64);
    let mut ticks = Vec::new();
    for _ in 0..rng.random_range(1..=12usize) {
        t += rng.random_range(0..=60u64);
        let cfg = SegmentConfig::new(
            rng.random_range(0.0..std::f64::consts::PI),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.random_range(50.0..150.0),
        )
        .unwrap();
        let disk = disk_pose(rng.random_range(1..=5usize), &cfg, &geom).unwrap();
        let mut gaps = Vec::new();
        let mut poses = Vec::new();
        for ch in 0..units {
            if rng.random_bool(0.3) {
                continue;
            }
            let status = match rng.random_range(0..4u8) {
                0 => GapStatus::Contact,
                1 => GapStatus::BeyondRange,
                _ => GapStatus::InRange,
            };
            let distance = match status {
                GapStatus::Contact => 0.0,
                GapStatus::BeyondRange => 9.0,
                GapStatus::InRange => rng.random_range(0.0..15.0),
            };
            gaps.push(GapEstimate { channel: ch as u8, distance, status, timestamp: t });
            poses.push(sensor_world_pose(&disk, &layout, ch).unwrap());
        }
        ticks.push((gaps, poses));
    }
    MapInstance { ticks, zones, horizon_ms }
}

pub fn incremental_map(inst: &MapInstance) -> ObstacleMap {
    let mut map = ObstacleMap::default();
    for (gaps, poses) in &inst.ticks {
        map = update_map_with_horizon(gaps, poses, &inst.zones, &map, inst.horizon_ms).unwrap();
    }
    map
}

/// The map rebuilt from the whole history at once.
pub fn brute_force_map(inst: &MapInstance) -> ObstacleMap {
    let stamp = inst
        .ticks
        .iter()
        .flat_map(|(g, _)| g.iter().map(|x| x.timestamp))
        .max()
        .unwrap_or(0);
    let mut channels = BTreeMap::new();
    let mut points = Vec::new();
    for (gaps, poses) in &inst.ticks {
        for (g, pose) in gaps.iter().zip(poses) {
            let b = pose.rotation.column(0);
            let (state, point) = match g.status {
                GapStatus::BeyondRange => (ChannelState { gap: *g, plane: None, zone: Zone::Safe }, None),
                GapStatus::Contact | GapStatus::InRange => {
                    let d = if g.status == GapStatus::Contact { 0.0 } else { g.distance };
                    let p = pose.position;
                    let at = Vector3::new(p.x + b[0] * d, p.y + b[1] * d, p.z + b[2] * d);
                    let zone = if g.status == GapStatus::Contact { Zone::Intrusion } else { classify_zone(d, &inst.zones) };
                    let plane = Plane { point: at, normal: Vector3::new(b[0], b[1], b[2]) };
                    (ChannelState { gap: *g, plane: Some(plane), zone }, Some(at))
                }
            };
            channels.insert(g.channel, state);
            if let Some(position) = point {
                if g.timestamp + inst.horizon_ms > stamp {
                    points.push(ObstaclePoint { position, channel: g.channel, timestamp: g.timestamp });
                }
            }
        }
    }
    ObstacleMap { channels, points, stamp }
}

/// Number of random instances whose incremental and rebuilt maps differ.
pub fn map_oracle_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .filter(|_| {
            let inst = random_map_instance(&mut rng);
            incremental_map(&inst) != brute_force_map(&inst)
        })
        .count()
}

pub struct StaticVariance {
    pub raw: f64,
    pub filtered: f64,
    /// Raw and filtered readings of each position.
    pub windows: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Static-position protocol: 20 target positions, 200 readings each after a
/// 50-reading warm-up, variances averaged over positions.
pub fn static_variance(calib: &SensorCalibration, noise: &NoiseModel, seed: u64) -> StaticVariance {
    let (mut raw_var, mut filt_var) = (0.0, 0.0);
    let mut windows = Vec::new();
    let positions = 20;
    for p in 0..positions {
        let distance = 2.0 + 0.25 * p as f64;
        let mut state = NoiseState::new(seed, p as u64 + 1);
        let mut filter = FilterState::new(FilterConfig::default());
        let mut raw = Vec::new();
        let mut filtered = Vec::new();
        for i in 0..250u64 {
            let counts = synthesize_reading(Some(distance), calib, noise, &mut state) as f64;
            let out = filter.push_sample(RawSample { timestamp: i * 10, channel: 0, value: counts });
            if i >= 50 {
                raw.push(counts);
                filtered.push(out.value);
            }
        }
        raw_var += variance(&raw).unwrap();
        filt_var += variance(&filtered).unwrap();
        windows.push((raw, filtered));
    }
    StaticVariance {
        raw: raw_var / positions as f64,
        filtered: filt_var / positions as f64,
        windows,
    }
}
