#![allow(dead_code)]

pub mod corpus;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vecorch::orchestrators::{server_budget, ObjectiveConfig, Problem};
use vecorch::pdt::{predict_rates, StateMode};
use vecorch::semantics::BetaWeights;
use vecorch::sim::ChannelState;
use vecorch::{PredictiveState, SimParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn params(k: usize) -> SimParams {
    SimParams {
        deadline_s: vec![0.15; k],
        task_rate_per_slot: vec![0.3; k],
        ..SimParams::default()
    }
}

/// A random one-step state: positions anywhere on the segment, some empty
/// queues, rates from the channel model at an equal bandwidth share.
pub fn random_state(r: &mut ChaCha8Rng, n: usize, k: usize, p: &SimParams) -> PredictiveState {
    let positions: Vec<f64> = (0..n).map(|_| r.random_range(0.0..p.segment_length_m)).collect();
    let pred: Vec<Vec<f64>> = positions.iter().map(|&x| vec![x]).collect();
    let share = p.bandwidth_hz / n.max(1) as f64;
    let rates = predict_rates(&pred, &vec![ChannelState::default(); n], share, p);
    let vb: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..k)
                .map(|_| if r.random_bool(0.2) { 0.0 } else { r.random_range(500.0..4000.0) })
                .collect()
        })
        .collect();
    let totals: Vec<f64> = (0..k).map(|j| vb.iter().map(|row| row[j]).sum()).collect();
    PredictiveState {
        slot_index: 0,
        horizon: 1,
        mode: StateMode::Oracle,
        vehicle_ids: (0..n as u64).collect(),
        current_positions_m: positions,
        current_rates_bps: rates.iter().map(|row| row[0]).collect(),
        predicted_positions_m: pred,
        predicted_rates_bps: rates,
        predicted_arrivals_bytes: (0..k).map(|_| vec![r.random_range(0.0..3000.0)]).collect(),
        current_backlogs_bytes: totals,
        vehicle_backlogs_bytes: vb,
        bandwidth_share_hz: share,
        low_confidence: false,
    }
}

pub fn random_beta(r: &mut ChaCha8Rng) -> BetaWeights {
    const LEVELS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 8.0];
    BetaWeights::new(LEVELS[r.random_range(0..5)], LEVELS[r.random_range(0..5)])
}

/// All points of {0, step, .., 1}^dims.
fn grid_points(dims: usize, steps: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..dims {
        let mut next = Vec::with_capacity(out.len() * (steps + 1));
        for p in &out {
            for i in 0..=steps {
                let mut q = p.clone();
                q.push(i);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Exhaustive minimum of the objective over the (w, a) grid with spacing
/// `1/steps`. Every grid point of every vehicle is evaluated; the per-vehicle
/// tables are then combined under the CPU budget, which is exact because the
/// objective is a sum of per-vehicle costs (checked separately).
pub fn brute_force_min(state: &PredictiveState, beta: &BetaWeights, p: &SimParams, cfg: &ObjectiveConfig, steps: usize) -> f64 {
    let problem = Problem::new(state, beta, p, cfg);
    let n = state.num_vehicles();
    let k = state.num_types();
    let step = 1.0 / steps as f64;
    let budget_units = ((server_budget(state, cfg) + 1e-9) / step).floor() as usize;
    let max_units = steps * k;
    let mut dp = vec![f64::INFINITY; max_units * n + 1];
    dp[0] = 0.0;
    let pts = grid_points(k, steps);
    for v in 0..n {
        let mut best = vec![f64::INFINITY; max_units + 1];
        for wi in &pts {
            let w: Vec<f64> = wi.iter().map(|&i| i as f64 * step).collect();
            for ai in &pts {
                if ai.iter().zip(wi).any(|(&a, &w)| a > 0 && w == 0) {
                    continue;
                }
                let a: Vec<f64> = ai.iter().map(|&i| i as f64 * step).collect();
                let units: usize = ai.iter().sum();
                let c = problem.vehicle_cost(v, &w, &a);
                if c < best[units] {
                    best[units] = c;
                }
            }
        }
        let mut next = vec![f64::INFINITY; dp.len()];
        for (s, &base) in dp.iter().enumerate() {
            if !base.is_finite() {
                continue;
            }
            for (u, &c) in best.iter().enumerate() {
                if s + u < next.len() && base + c < next[s + u] {
                    next[s + u] = base + c;
                }
            }
        }
        dp = next;
    }
    problem.drift_const() + dp.iter().take(budget_units + 1).cloned().fold(f64::INFINITY, f64::min)
}
