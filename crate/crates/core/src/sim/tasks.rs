use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::params::SimParams;
use super::VehicleState;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u64,
    pub vehicle_id: u64,
    pub type_k: usize,
    pub size_bytes: u32,
    pub cycles_required: f64,
    pub deadline_s: f64,
    pub created_slot: u64,
    /// When inside its creation slot the task appeared, in `[0, slot_duration)`.
    pub arrival_offset_s: f64,
}

impl Task {
    pub fn new(
        id: u64,
        vehicle_id: u64,
        type_k: usize,
        size_bytes: u32,
        created_slot: u64,
        arrival_offset_s: f64,
        params: &SimParams,
    ) -> Task {
        Task {
            id,
            vehicle_id,
            type_k,
            size_bytes,
            cycles_required: size_bytes as f64 * params.cycles_per_byte,
            deadline_s: params.deadline_s[type_k],
            created_slot,
            arrival_offset_s,
        }
    }

    /// Absolute arrival instant in seconds since slot 0.
    pub fn arrival_time_s(&self, slot_duration_s: f64) -> f64 {
        self.created_slot as f64 * slot_duration_s + self.arrival_offset_s
    }
}

/// Tasks generated by the active vehicles during `slot`. Per vehicle and
/// type the count is Poisson(`task_rate_per_slot[k]`), sizes are uniform in
/// the configured range. Ids are handed out from `first_id` in (vehicle id,
/// type, draw) order.
pub fn generate_tasks(
    vehicles: &[VehicleState],
    params: &SimParams,
    seed: u64,
    slot: u64,
    first_id: u64,
) -> Vec<Task> {
    let mut order: Vec<&VehicleState> = vehicles.iter().filter(|v| v.active).collect();
    order.sort_by_key(|v| v.id);
    let (lo, hi) = params.task_size_range_bytes;
    let mut next_id = first_id;
    let mut out = Vec::new();
    for v in order {
        let mut rng = stream_rng(seed, Stream::Tasks, slot, v.id);
        for (k, &rate) in params.task_rate_per_slot.iter().enumerate() {
            let count = if rate > 0.0 {
                Poisson::new(rate).expect("finite rate").sample(&mut rng) as u64
            } else {
                0
            };
            for _ in 0..count {
                let size = rng.random_range(lo..=hi);
                let offset = rng.random_range(0.0..params.slot_duration_s);
                out.push(Task::new(next_id, v.id, k, size, slot, offset, params));
                next_id += 1;
            }
        }
    }
    out
}
