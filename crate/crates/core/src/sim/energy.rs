//! Energy cost model shared by the executor and the objective.
//!
//! Dynamic CPU power gives `E = κ·f²·cycles`. Local work runs at `f_v`;
//! offloaded work runs at the allocated server frequency `α·f_e`.
//! Transmission costs `P_n` times airtime.

use super::params::SimParams;

pub fn local_compute_j(cycles: f64, params: &SimParams) -> f64 {
    params.effective_capacitance * params.vehicle_cpu_hz * params.vehicle_cpu_hz * cycles
}

pub fn server_compute_j(cycles: f64, share: f64, params: &SimParams) -> f64 {
    let f = share * params.server_cpu_hz;
    params.effective_capacitance * f * f * cycles
}

pub fn transmit_j(airtime_s: f64, params: &SimParams) -> f64 {
    params.tx_power_w * airtime_s
}
