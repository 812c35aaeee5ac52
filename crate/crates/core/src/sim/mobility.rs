use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::channel::ChannelState;
use super::params::SimParams;
use super::VehicleState;
use crate::rng::{stream_rng, Stream};

/// Dynamic-scenario volatility: periodic speed re-draws, log-normal
/// shadowing and per-vehicle noise bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Volatility {
    /// Every this many slots each vehicle's speed is re-drawn (0 = never).
    pub speed_redraw_interval: u64,
    pub shadowing_sigma_db: f64,
    /// Probability per vehicle per slot that a noise burst starts.
    pub burst_probability: f64,
    pub burst_duration_slots: u64,
    pub burst_magnitude_db: f64,
}

impl Default for Volatility {
    fn default() -> Self {
        Volatility {
            speed_redraw_interval: 10,
            shadowing_sigma_db: 4.0,
            burst_probability: 0.05,
            burst_duration_slots: 3,
            burst_magnitude_db: 35.0,
        }
    }
}

fn draw_speed<R: Rng>(rng: &mut R, params: &SimParams) -> f64 {
    let (lo, hi) = params.speed_range_mps;
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

/// New vehicles entering at position 0 during `slot`. The count is
/// Poisson(`vehicle_arrival_rate`); ids are assigned from `first_id` upward.
pub fn spawn_vehicles(params: &SimParams, seed: u64, slot: u64, first_id: u64) -> Vec<VehicleState> {
    let mut rng = stream_rng(seed, Stream::Spawn, slot, 0);
    let n = poisson_count(&mut rng, params.vehicle_arrival_rate);
    (0..n)
        .map(|i| VehicleState {
            id: first_id + i,
            position_m: 0.0,
            velocity_mps: draw_speed(&mut rng, params),
            active: true,
            channel: ChannelState::default(),
        })
        .collect()
}

/// `count` replacement vehicles entering at position 0 (fixed-population
/// mode refills departures with these).
pub fn spawn_replacements(
    params: &SimParams,
    seed: u64,
    slot: u64,
    first_id: u64,
    count: usize,
) -> Vec<VehicleState> {
    let mut rng = stream_rng(seed, Stream::Spawn, slot, 1);
    (0..count as u64)
        .map(|i| VehicleState {
            id: first_id + i,
            position_m: 0.0,
            velocity_mps: draw_speed(&mut rng, params),
            active: true,
            channel: ChannelState::default(),
        })
        .collect()
}

/// Initial population spread uniformly along the segment.
pub fn place_initial(params: &SimParams, seed: u64, count: usize, first_id: u64) -> Vec<VehicleState> {
    let mut rng = stream_rng(seed, Stream::Placement, 0, 0);
    let mut out: Vec<VehicleState> = (0..count as u64)
        .map(|i| VehicleState {
            id: first_id + i,
            position_m: rng.random_range(0.0..params.segment_length_m),
            velocity_mps: draw_speed(&mut rng, params),
            active: true,
            channel: ChannelState::default(),
        })
        .collect();
    out.sort_by_key(|v| v.id);
    out
}

/// Moves every active vehicle by `velocity × dt`; vehicles past the end of
/// the segment are marked inactive.
pub fn advance_mobility(vehicles: &mut [VehicleState], params: &SimParams, dt_s: f64) {
    for v in vehicles.iter_mut().filter(|v| v.active) {
        v.position_m += v.velocity_mps * dt_s;
        if v.position_m > params.segment_length_m {
            v.active = false;
        }
    }
}

/// Speed re-draw at volatility boundaries.
pub fn redraw_speeds(vehicles: &mut [VehicleState], params: &SimParams, seed: u64, slot: u64) {
    for v in vehicles.iter_mut() {
        let mut rng = stream_rng(seed, Stream::SpeedRedraw, slot, v.id);
        v.velocity_mps = draw_speed(&mut rng, params);
    }
}

/// Channel impairments of `vehicle_id` in `slot`. A pure function of its
/// arguments so future slots can be read without advancing any state.
pub fn channel_state(seed: u64, slot: u64, vehicle_id: u64, volatility: Option<&Volatility>) -> ChannelState {
    let Some(vol) = volatility else {
        return ChannelState::default();
    };
    let shadowing_db = if vol.shadowing_sigma_db > 0.0 {
        let mut rng = stream_rng(seed, Stream::Shadowing, slot, vehicle_id);
        Normal::new(0.0, vol.shadowing_sigma_db)
            .expect("finite sigma")
            .sample(&mut rng)
    } else {
        0.0
    };
    let first = slot.saturating_sub(vol.burst_duration_slots.saturating_sub(1));
    let bursting = vol.burst_duration_slots > 0
        && vol.burst_probability > 0.0
        && (first..=slot).any(|s| {
            let mut rng = stream_rng(seed, Stream::Burst, s, vehicle_id);
            rng.random::<f64>() < vol.burst_probability
        });
    ChannelState {
        shadowing_db,
        noise_burst_db: if bursting { vol.burst_magnitude_db } else { 0.0 },
    }
}
