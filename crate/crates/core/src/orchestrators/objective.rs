//! Per-slot drift-plus-penalty objective on a predictive state.
//!
//! `total = Σ_k (q_k/u)·(Ẑ_k − φ_k)/u + β_E·Ê/e_u − β_Q·Û`
//!
//! where `u` is the backlog unit and `e_u` the energy unit. The objective is
//! separable across vehicles (rates use the assumed bandwidth share), so the
//! solver scores one vehicle row at a time through [`Problem`].

use serde::{Deserialize, Serialize};

use super::Decision;
use crate::error::{Error, Result};
use crate::pdt::PredictiveState;
use crate::semantics::BetaWeights;
use crate::sim::SimParams;

/// Backlog below this is treated as empty.
pub const EMPTY_BYTES: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    /// Drift is measured in these units (bytes).
    pub backlog_unit_bytes: f64,
    /// Energy is measured in these units (J). The default was picked so the
    /// server budget binds between 10 and 30 vehicles under balanced weights.
    pub energy_unit_j: f64,
    /// Average Ê and Û over h = 1..H instead of using h = 1 only.
    pub horizon_average: bool,
    /// Server share kept free while departed vehicles still have work.
    pub orphan_reserve: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            backlog_unit_bytes: 1000.0,
            energy_unit_j: 10_000.0,
            horizon_average: false,
            orphan_reserve: 0.0125,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub drift_term: f64,
    pub energy_term: f64,
    pub qos_term: f64,
    pub total: f64,
    /// Ê in joules, before weighting.
    pub predicted_energy_j: f64,
    /// Û before weighting.
    pub predicted_utility: f64,
    /// φ per type.
    pub served_bytes: Vec<f64>,
}

/// Server share available to the policy: everything, minus the orphan
/// reserve when work of departed vehicles is still queued.
pub fn server_budget(state: &PredictiveState, cfg: &ObjectiveConfig) -> f64 {
    let queued: f64 = state.current_backlogs_bytes.iter().sum();
    let attached: f64 = state.vehicle_backlogs_bytes.iter().flatten().sum();
    if queued - attached > EMPTY_BYTES {
        (1.0 - cfg.orphan_reserve).max(0.0)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VehicleTerms {
    /// `Σ_k (q_k/u²)·served_k`
    pub weighted_served: f64,
    pub energy_j: f64,
    pub utility: f64,
}

#[derive(Debug, Clone)]
struct VehicleInput {
    backlog: Vec<f64>,
    /// h = 1 rate, or every h when averaging.
    rates: Vec<f64>,
    priority: f64,
    has_work: bool,
}

/// Precomputed instance for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct Problem {
    k: usize,
    vehicles: Vec<VehicleInput>,
    drift_weight: Vec<f64>,
    drift_const: f64,
    beta_e: f64,
    beta_q: f64,
    energy_unit: f64,
    budget: f64,
    dt: f64,
    f_v: f64,
    f_e: f64,
    c: f64,
    kappa: f64,
    tx_power: f64,
    deadline: Vec<f64>,
}

impl Problem {
    pub fn new(state: &PredictiveState, beta: &BetaWeights, params: &SimParams, cfg: &ObjectiveConfig) -> Self {
        let k = state.num_types();
        let u = cfg.backlog_unit_bytes;
        let drift_weight: Vec<f64> = state.current_backlogs_bytes.iter().map(|q| q / (u * u)).collect();
        let drift_const = drift_weight
            .iter()
            .zip(&state.predicted_arrivals_bytes)
            .map(|(w, z)| w * z.first().copied().unwrap_or(0.0))
            .sum();
        let vehicles = state
            .vehicle_ids
            .iter()
            .enumerate()
            .map(|(n, id)| {
                let row = &state.predicted_rates_bps[n];
                let rates = if cfg.horizon_average && !row.is_empty() {
                    row.clone()
                } else {
                    vec![row.first().copied().unwrap_or(state.current_rates_bps[n])]
                };
                let backlog = state.vehicle_backlogs_bytes[n].clone();
                let has_work = backlog.iter().any(|&b| b > EMPTY_BYTES);
                VehicleInput {
                    backlog,
                    rates,
                    priority: beta.priority_of(*id),
                    has_work,
                }
            })
            .collect();
        Problem {
            k,
            vehicles,
            drift_weight,
            drift_const,
            beta_e: beta.beta_e,
            beta_q: beta.beta_q,
            energy_unit: cfg.energy_unit_j,
            budget: server_budget(state, cfg),
            dt: params.slot_duration_s,
            f_v: params.vehicle_cpu_hz,
            f_e: params.server_cpu_hz,
            c: params.cycles_per_byte,
            kappa: params.effective_capacitance,
            tx_power: params.tx_power_w,
            deadline: params.deadline_s.clone(),
        }
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn num_types(&self) -> usize {
        self.k
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn backlog(&self, n: usize, k: usize) -> f64 {
        self.vehicles[n].backlog[k]
    }

    pub fn has_work(&self, n: usize) -> bool {
        self.vehicles[n].has_work
    }

    /// Decision-independent part of the objective.
    pub fn drift_const(&self) -> f64 {
        self.drift_const
    }

    /// One vehicle's terms at one rate. Writes per-type served bytes into
    /// `served` when given.
    fn terms_at_rate(&self, n: usize, rate: f64, w: &[f64], a: &[f64], mut served: Option<&mut [f64]>) -> VehicleTerms {
        let v = &self.vehicles[n];
        if !v.has_work {
            return VehicleTerms::default();
        }
        let dt = self.dt;
        let (mut local_sum, mut off_sum) = (0.0, 0.0);
        for k in 0..self.k {
            let off = w[k] * v.backlog[k];
            off_sum += off;
            local_sum += v.backlog[k] - off;
        }

        let mut t = VehicleTerms::default();
        let mut finish: f64 = 0.0;
        let mut deadline = f64::INFINITY;

        // on-board CPU, shared by the local parts of every type
        let local_cap = dt * self.f_v / self.c;
        let local_done = local_sum.min(local_cap);
        let local_frac = if local_sum > EMPTY_BYTES { local_done / local_sum } else { 0.0 };
        if local_sum > EMPTY_BYTES {
            finish = self.c * local_sum / self.f_v;
            t.energy_j += self.kappa * self.f_v * self.f_v * self.c * local_done;
        }

        // uplink, then one server slice per type
        let t_tx = if off_sum > EMPTY_BYTES {
            if rate > 0.0 {
                8.0 * off_sum / rate
            } else {
                f64::INFINITY
            }
        } else {
            0.0
        };
        if off_sum > EMPTY_BYTES {
            t.energy_j += self.tx_power * t_tx.min(dt);
        }

        for k in 0..self.k {
            let backlog = v.backlog[k];
            if backlog <= EMPTY_BYTES {
                continue;
            }
            deadline = deadline.min(self.deadline[k]);
            let off = w[k] * backlog;
            let mut done = (backlog - off) * local_frac;
            if off > EMPTY_BYTES {
                if a[k] > 0.0 && t_tx.is_finite() {
                    let f = a[k] * self.f_e;
                    finish = finish.max(t_tx + self.c * off / f);
                    if t_tx < dt {
                        let srv = off.min((dt - t_tx) * f / self.c);
                        done += srv;
                        t.energy_j += self.kappa * f * f * self.c * srv;
                    }
                } else {
                    finish = f64::INFINITY;
                }
            }
            t.weighted_served += self.drift_weight[k] * done;
            if let Some(s) = served.as_deref_mut() {
                s[k] += done;
            }
        }

        let latency = dt / 2.0 + finish;
        t.utility = v.priority * ((deadline - latency) / deadline).clamp(0.0, 1.0);
        t
    }

    /// One vehicle's terms, averaged over the configured rates.
    pub fn vehicle_terms(&self, n: usize, w: &[f64], a: &[f64], served: Option<&mut [f64]>) -> VehicleTerms {
        let rates = &self.vehicles[n].rates;
        let mut t = self.terms_at_rate(n, rates[0], w, a, served);
        if rates.len() > 1 {
            let (mut e, mut u) = (t.energy_j, t.utility);
            for &r in &rates[1..] {
                let th = self.terms_at_rate(n, r, w, a, None);
                e += th.energy_j;
                u += th.utility;
            }
            t.energy_j = e / rates.len() as f64;
            t.utility = u / rates.len() as f64;
        }
        t
    }

    /// One vehicle's contribution to `total` (everything except the
    /// decision-independent drift constant).
    pub fn vehicle_cost(&self, n: usize, w: &[f64], a: &[f64]) -> f64 {
        let t = self.vehicle_terms(n, w, a, None);
        self.cost_of(&t)
    }

    pub fn cost_of(&self, t: &VehicleTerms) -> f64 {
        -t.weighted_served + self.beta_e * t.energy_j / self.energy_unit - self.beta_q * t.utility
    }

    /// Full objective for row-major `w`, `a` aligned with the state's vehicles.
    pub fn evaluate_rows(&self, w: &[Vec<f64>], a: &[Vec<f64>]) -> ObjectiveBreakdown {
        let mut served = vec![0.0; self.k];
        let (mut ws, mut e, mut u) = (0.0, 0.0, 0.0);
        for n in 0..self.vehicles.len() {
            let t = self.vehicle_terms(n, &w[n], &a[n], Some(&mut served));
            ws += t.weighted_served;
            e += t.energy_j;
            u += t.utility;
        }
        let drift_term = self.drift_const - ws;
        let energy_term = self.beta_e * e / self.energy_unit;
        let qos_term = self.beta_q * u;
        ObjectiveBreakdown {
            drift_term,
            energy_term,
            qos_term,
            total: drift_term + energy_term - qos_term,
            predicted_energy_j: e,
            predicted_utility: u,
            served_bytes: served,
        }
    }

    /// Sum of the per-vehicle costs (no drift constant).
    pub fn cost_rows(&self, w: &[Vec<f64>], a: &[Vec<f64>]) -> f64 {
        (0..self.vehicles.len()).map(|n| self.vehicle_cost(n, &w[n], &a[n])).sum()
    }
}

/// Rows of `decision` aligned with the state's vehicle order; vehicles the
/// decision does not mention compute locally.
pub fn aligned_rows(decision: &Decision, state: &PredictiveState) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = state.num_types();
    let mut w = vec![vec![0.0; k]; state.num_vehicles()];
    let mut a = w.clone();
    for (n, id) in state.vehicle_ids.iter().enumerate() {
        if let Some(r) = decision.row_of(*id) {
            w[n].copy_from_slice(&decision.offload[r]);
            a[n].copy_from_slice(&decision.alloc[r]);
        }
    }
    (w, a)
}

pub fn evaluate_objective(
    decision: &Decision,
    state: &PredictiveState,
    beta: &BetaWeights,
    params: &SimParams,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown> {
    decision.validate(state.num_types())?;
    if params.num_task_types() != state.num_types() {
        return Err(Error::InvalidDecision("state and parameters disagree on K".into()));
    }
    let problem = Problem::new(state, beta, params, cfg);
    let (w, a) = aligned_rows(decision, state);
    Ok(problem.evaluate_rows(&w, &a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdt::StateMode;

    fn one_vehicle_state(backlog: Vec<f64>, rate: f64) -> PredictiveState {
        let k = backlog.len();
        PredictiveState {
            slot_index: 1,
            horizon: 1,
            mode: StateMode::Oracle,
            vehicle_ids: vec![0],
            current_positions_m: vec![1099.5],
            current_rates_bps: vec![rate],
            predicted_positions_m: vec![vec![1099.5]],
            predicted_rates_bps: vec![vec![rate]],
            predicted_arrivals_bytes: vec![vec![0.0]; k],
            current_backlogs_bytes: backlog.clone(),
            vehicle_backlogs_bytes: vec![backlog],
            bandwidth_share_hz: 2e6,
            low_confidence: false,
        }
    }

    fn params_k(k: usize) -> SimParams {
        SimParams {
            deadline_s: vec![0.15; k],
            task_rate_per_slot: vec![0.3; k],
            ..SimParams::default()
        }
    }

    fn dec(w: f64, a: f64) -> Decision {
        let mut d = Decision::all_local(1, vec![0], 1);
        d.offload[0][0] = w;
        d.alloc[0][0] = a;
        d
    }

    #[test]
    fn empty_instance_is_zero() {
        let s = one_vehicle_state(vec![0.0], 28.6e6);
        let b = evaluate_objective(&dec(0.0, 0.0), &s, &BetaWeights::balanced(), &params_k(1), &ObjectiveConfig::default()).unwrap();
        assert_eq!((b.drift_term, b.energy_term, b.qos_term, b.total), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_computed_offload() {
        // 1000 B, ω = 1, α = 0.1 at 28.6 Mbit/s
        let rate = 2e6 * (1.0f64 + 2e4).log2();
        let s = one_vehicle_state(vec![1000.0], rate);
        let p = params_k(1);
        let cfg = ObjectiveConfig::default();
        let b = evaluate_objective(&dec(1.0, 0.1), &s, &BetaWeights::balanced(), &p, &cfg).unwrap();
        let t_tx = 8000.0 / rate;
        let t_srv = 2.5e8 / 4e10;
        let e = 0.2 * t_tx + 1e-28 * 4e10f64.powi(2) * 2.5e8;
        assert!((b.predicted_energy_j - e).abs() < 1e-9 * e);
        let lat = 0.05 + t_tx + t_srv;
        assert!((b.predicted_utility - (0.15 - lat) / 0.15).abs() < 1e-12);
        // q = 1000 B, u = 1 kB: drift = 1·(0 − 1)
        assert!((b.drift_term + 1.0).abs() < 1e-12);
        assert!((b.total - (b.drift_term + b.energy_term - b.qos_term)).abs() < 1e-12);
    }

    #[test]
    fn energy_term_linear_in_beta_e() {
        let s = one_vehicle_state(vec![1200.0], 20e6);
        let p = params_k(1);
        let cfg = ObjectiveConfig::default();
        let b1 = evaluate_objective(&dec(0.5, 0.05), &s, &BetaWeights::new(1.0, 1.0), &p, &cfg).unwrap();
        let b2 = evaluate_objective(&dec(0.5, 0.05), &s, &BetaWeights::new(2.0, 1.0), &p, &cfg).unwrap();
        assert_eq!(b2.energy_term, 2.0 * b1.energy_term);
        assert_eq!((b2.drift_term, b2.qos_term), (b1.drift_term, b1.qos_term));
    }

    #[test]
    fn unallocated_offload_gives_no_utility() {
        let s = one_vehicle_state(vec![1200.0], 20e6);
        let b = evaluate_objective(&dec(0.5, 0.0), &s, &BetaWeights::balanced(), &params_k(1), &ObjectiveConfig::default()).unwrap();
        assert_eq!(b.predicted_utility, 0.0);
    }

    #[test]
    fn invalid_decision_rejected() {
        let s = one_vehicle_state(vec![1200.0], 20e6);
        let r = evaluate_objective(&dec(0.0, 0.5), &s, &BetaWeights::balanced(), &params_k(1), &ObjectiveConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn orphan_work_reserves_budget() {
        let mut s = one_vehicle_state(vec![1200.0], 20e6);
        let cfg = ObjectiveConfig::default();
        assert_eq!(server_budget(&s, &cfg), 1.0);
        s.current_backlogs_bytes[0] += 500.0;
        assert_eq!(server_budget(&s, &cfg), 1.0 - cfg.orphan_reserve);
    }
}
