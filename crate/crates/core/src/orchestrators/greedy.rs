//! Greedy offloading baseline: the best current channels offload
//! everything, the server CPU is split evenly between them.

use serde::{Deserialize, Serialize};

use super::objective::{server_budget, ObjectiveConfig};
use super::{Decision, DecisionFlags, PolicyTag};
use crate::pdt::PredictiveState;
use crate::sim::SimParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    /// Smallest CPU share handed to one offloaded task type; fixes how many
    /// vehicles fit in the budget.
    pub min_share: f64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig { min_share: 0.1 }
    }
}

impl GreedyConfig {
    /// Number of vehicles that may offload for `k` task types.
    pub fn max_offloaders(&self, budget: f64, k: usize) -> usize {
        ((budget / (self.min_share * k.max(1) as f64)) + 1e-9).floor().max(1.0) as usize
    }
}

/// Ignores forecasts, β and queues: only the current rates matter.
pub fn greedy_decide(state: &PredictiveState, params: &SimParams, cfg: &GreedyConfig, obj: &ObjectiveConfig) -> Decision {
    let n = state.num_vehicles();
    let k = params.num_task_types();
    let budget = server_budget(state, obj);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        state.current_rates_bps[j]
            .total_cmp(&state.current_rates_bps[i])
            .then(state.vehicle_ids[i].cmp(&state.vehicle_ids[j]))
    });
    let chosen = cfg.max_offloaders(budget, k).min(n);
    let mut d = Decision::all_local(state.slot_index, state.vehicle_ids.clone(), k);
    d.policy = PolicyTag::Greedy;
    d.flags = DecisionFlags::default();
    if chosen == 0 || k == 0 {
        return d;
    }
    let share = budget / (chosen * k) as f64;
    for &i in &order[..chosen] {
        d.offload[i] = vec![1.0; k];
        d.alloc[i] = vec![share; k];
    }
    d
}
