//! Large-scale channel and Shannon rate.

use serde::{Deserialize, Serialize};

use super::params::SimParams;
use super::VehicleState;

/// Per-slot channel impairments on one vehicle's uplink. Both are zero in
/// the baseline channel; the volatility preset drives them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// Log-normal shadowing loss added to the path loss (dB, may be negative).
    pub shadowing_db: f64,
    /// Extra noise/interference on top of the thermal floor (dB, >= 0).
    pub noise_burst_db: f64,
}

impl ChannelState {
    pub fn extra_loss_db(&self) -> f64 {
        self.shadowing_db + self.noise_burst_db
    }
}

pub fn path_loss_db(distance_m: f64, params: &SimParams) -> f64 {
    let pl = &params.path_loss;
    let d = distance_m.max(pl.reference_distance_m);
    pl.reference_loss_db + 10.0 * pl.exponent * (d / pl.reference_distance_m).log10()
}

/// Linear power gain at `distance_m`. Distances below the reference distance
/// clamp to it.
pub fn channel_gain(distance_m: f64, params: &SimParams) -> f64 {
    10f64.powf(-path_loss_db(distance_m, params) / 10.0)
}

/// Straight-line distance from a road position to the server antenna.
pub fn server_distance_m(position_m: f64, server_position_m: f64, params: &SimParams) -> f64 {
    let along = position_m - server_position_m;
    (along * along + params.server_offset_m * params.server_offset_m).sqrt()
}

pub fn snr_linear(distance_m: f64, channel: &ChannelState, params: &SimParams) -> f64 {
    let gain = channel_gain(distance_m, params) * 10f64.powf(-channel.extra_loss_db() / 10.0);
    params.tx_power_w * gain / params.noise_power_w
}

/// Shannon rate in bit/s for a given bandwidth share.
pub fn shannon_rate(bandwidth_share_hz: f64, snr: f64) -> f64 {
    bandwidth_share_hz * (1.0 + snr).log2()
}

pub fn rate_at_position(
    position_m: f64,
    channel: &ChannelState,
    bandwidth_share_hz: f64,
    params: &SimParams,
) -> f64 {
    let d = server_distance_m(position_m, params.server_position_m, params);
    shannon_rate(bandwidth_share_hz, snr_linear(d, channel, params))
}

/// Uplink rate of `vehicle` towards a server at `server_position_m`.
pub fn achievable_rate(
    vehicle: &VehicleState,
    server_position_m: f64,
    bandwidth_share_hz: f64,
    params: &SimParams,
) -> f64 {
    let d = server_distance_m(vehicle.position_m, server_position_m, params);
    shannon_rate(bandwidth_share_hz, snr_linear(d, &vehicle.channel, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vehicle_at(pos: f64) -> VehicleState {
        VehicleState {
            id: 0,
            position_m: pos,
            velocity_mps: 20.0,
            active: true,
            channel: ChannelState::default(),
        }
    }

    #[test]
    fn reference_distance_gain() {
        let p = SimParams::default();
        assert!((channel_gain(1.0, &p) - 1e-3).abs() < 1e-18);
        // clamps below d0
        assert_eq!(channel_gain(0.0, &p), channel_gain(1.0, &p));
        assert_eq!(channel_gain(0.5, &p), channel_gain(1.0, &p));
    }

    #[test]
    fn hand_computed_log_distance() {
        // PL = 30 + 30·log10(100) = 90 dB
        let p = SimParams::default();
        assert!((path_loss_db(100.0, &p) - 90.0).abs() < 1e-12);
        assert!((channel_gain(100.0, &p) - 1e-9).abs() < 1e-21);
    }

    #[test]
    fn gain_monotone() {
        let p = SimParams::default();
        assert!(channel_gain(100.0, &p) >= channel_gain(500.0, &p));
        assert!(channel_gain(500.0, &p) >= channel_gain(1000.0, &p));
        let g = channel_gain(1e6, &p);
        assert!(g > 0.0 && g <= 1.0);
    }

    #[test]
    fn unit_snr_gives_bandwidth() {
        assert!((shannon_rate(20e6, 1.0) - 20e6).abs() < 1e-6);
        let full = shannon_rate(20e6, 37.0);
        let half = shannon_rate(10e6, 37.0);
        assert!((full - 2.0 * half).abs() < 1e-6);
    }

    #[test]
    fn table_example_rate() {
        // P=0.2 W, σ²=1e-14 W, g=1e-9 → SNR 2e4; 2 MHz share
        let p = SimParams::default();
        let snr = p.tx_power_w * 1e-9 / p.noise_power_w;
        assert!((snr - 2e4).abs() < 1e-6);
        let r = shannon_rate(2e6, snr);
        let expected = 2e6 * (1.0f64 + 2e4).log2();
        assert!((r - expected).abs() < 1e-6);
        assert!((r / 1e6 - 28.575).abs() < 0.01);
    }

    #[test]
    fn rate_depends_on_distance_from_server() {
        let p = SimParams::default();
        let near = achievable_rate(&vehicle_at(1000.0), 1000.0, 1e6, &p);
        let mid = achievable_rate(&vehicle_at(1500.0), 1000.0, 1e6, &p);
        let far = achievable_rate(&vehicle_at(2000.0), 1000.0, 1e6, &p);
        assert!(near > mid && mid > far);
        // at the server location the 10 m offset applies
        let d10 = shannon_rate(1e6, p.tx_power_w * channel_gain(10.0, &p) / p.noise_power_w);
        assert!((near - d10).abs() < 1e-6);
    }

    #[test]
    fn impairments_reduce_rate() {
        let p = SimParams::default();
        let mut v = vehicle_at(1500.0);
        let clean = achievable_rate(&v, 1000.0, 1e6, &p);
        v.channel.noise_burst_db = 20.0;
        let burst = achievable_rate(&v, 1000.0, 1e6, &p);
        assert!(burst < clean);
    }
}
