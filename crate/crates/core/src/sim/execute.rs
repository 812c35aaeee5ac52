//! One slot of task processing.
//!
//! Each vehicle runs three FIFO pipelines over its pending tasks (ordered by
//! arrival): the on-board CPU for the local share, the uplink for the
//! offloaded share, and the server CPU slice `α·f_e` of each task type.
//! Server work on a task starts once its bytes are on the server. Anything
//! not finished when the slot ends stays queued; offloaded bytes that were
//! sent but not computed are sent again next slot.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::channel::achievable_rate;
use super::energy::{local_compute_j, server_compute_j, transmit_j};
use super::params::SimParams;
use super::queue::QueueState;
use super::tasks::Task;
use super::VehicleState;
use crate::error::Result;
use crate::orchestrators::Decision;

/// Remaining bytes below this count as done.
const DONE_EPS_BYTES: f64 = 1e-6;

/// What happens to queued work of vehicles that left the segment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeparturePolicy {
    /// Finished at the server on a small reserved CPU slice.
    #[default]
    CompleteAtServer,
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecOptions {
    pub slot: u64,
    pub departure: DeparturePolicy,
    /// CPU share for work of departed vehicles, taken from what the decision
    /// left unallocated.
    pub orphan_share: f64,
}

impl ExecOptions {
    pub fn new(slot: u64) -> Self {
        ExecOptions {
            slot,
            departure: DeparturePolicy::CompleteAtServer,
            orphan_share: 0.0125,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskCompletion {
    pub task_id: u64,
    pub vehicle_id: u64,
    pub type_k: usize,
    pub latency_s: f64,
    pub met_deadline: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub transmit_j: f64,
    pub local_j: f64,
    pub server_j: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.transmit_j + self.local_j + self.server_j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotOutcome {
    pub slot: u64,
    pub completions: Vec<TaskCompletion>,
    pub slot_energy_j: f64,
    pub energy: EnergyBreakdown,
    /// Energy attributed to each task touched this slot.
    pub task_energy_j: Vec<(u64, f64)>,
    /// φ_k: bytes processed per queue.
    pub served_bytes: Vec<f64>,
    /// Z_k: bytes that joined each queue at the end of the slot.
    pub arrived_bytes: Vec<f64>,
    /// Bytes removed because their vehicle departed (drop policy only).
    pub dropped_bytes: Vec<f64>,
    /// Backlog after the Lindley update.
    pub backlog_bytes: Vec<f64>,
    pub transmitting_vehicles: usize,
}

impl SlotOutcome {
    pub fn empty(slot: u64, num_types: usize) -> Self {
        SlotOutcome {
            slot,
            completions: Vec::new(),
            slot_energy_j: 0.0,
            energy: EnergyBreakdown::default(),
            task_energy_j: Vec::new(),
            served_bytes: vec![0.0; num_types],
            arrived_bytes: vec![0.0; num_types],
            dropped_bytes: vec![0.0; num_types],
            backlog_bytes: vec![0.0; num_types],
            transmitting_vehicles: 0,
        }
    }
}

/// Work done on one pending task during the slot.
#[derive(Debug, Default, Clone, Copy)]
struct Progress {
    done_bytes: f64,
    finish_s: f64,
    energy: EnergyBreakdown,
}

/// Runs one slot under `decision`, then appends `new_tasks` (Lindley order:
/// arrivals of slot t are served from slot t+1 on).
pub fn execute_slot(
    queues: &QueueState,
    new_tasks: &[Task],
    decision: &Decision,
    vehicles: &[VehicleState],
    params: &SimParams,
    opts: &ExecOptions,
) -> Result<(QueueState, SlotOutcome)> {
    let num_types = params.num_task_types();
    decision.validate(num_types)?;

    let dt = params.slot_duration_s;
    let slot_start = opts.slot as f64 * dt;
    let active: BTreeMap<u64, &VehicleState> = vehicles
        .iter()
        .filter(|v| v.active)
        .map(|v| (v.id, v))
        .collect();

    // (queue k, index in queue) of every pending task, grouped per vehicle.
    let mut per_vehicle: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    let mut orphans: Vec<(usize, usize)> = Vec::new();
    for (k, q) in queues.queues.iter().enumerate() {
        for (i, p) in q.iter().enumerate() {
            if active.contains_key(&p.task.vehicle_id) {
                per_vehicle.entry(p.task.vehicle_id).or_default().push((k, i));
            } else {
                orphans.push((k, i));
            }
        }
    }
    let by_arrival = |a: &(usize, usize), b: &(usize, usize)| {
        let ta = &queues.queues[a.0][a.1].task;
        let tb = &queues.queues[b.0][b.1].task;
        ta.arrival_time_s(dt)
            .total_cmp(&tb.arrival_time_s(dt))
            .then(ta.id.cmp(&tb.id))
    };

    let transmitting: HashSet<u64> = per_vehicle
        .iter()
        .filter(|(id, items)| {
            items.iter().any(|&(k, i)| {
                decision.offload_for(**id, k) > 0.0 && queues.queues[k][i].remaining_bytes > 0.0
            })
        })
        .map(|(id, _)| *id)
        .collect();
    let share_hz = params.bandwidth_hz / transmitting.len().max(1) as f64;

    let mut progress: Vec<Vec<Progress>> = queues
        .queues
        .iter()
        .map(|q| vec![Progress::default(); q.len()])
        .collect();

    for (vid, items) in per_vehicle.iter_mut() {
        items.sort_by(by_arrival);
        let vehicle = active[vid];
        let rate = achievable_rate(vehicle, params.server_position_m, share_hz, params);
        let mut clock_local = 0.0;
        let mut clock_tx = 0.0;
        let mut clock_server = vec![0.0; num_types];

        for &(k, i) in items.iter() {
            let pending = &queues.queues[k][i];
            let remaining = pending.remaining_bytes;
            let w = decision.offload_for(*vid, k);
            let a = decision.alloc_for(*vid, k);
            let off = w * remaining;
            let loc = remaining - off;
            let mut pr = Progress::default();
            let mut finish: f64 = 0.0;

            if loc > 0.0 {
                let mut done = 0.0;
                if clock_local < dt {
                    done = loc.min((dt - clock_local) * params.vehicle_cpu_hz / params.cycles_per_byte);
                    clock_local += done * params.cycles_per_byte / params.vehicle_cpu_hz;
                }
                pr.energy.local_j = local_compute_j(done * params.cycles_per_byte, params);
                pr.done_bytes += done;
                finish = finish.max(clock_local);
            }

            if off > 0.0 {
                let mut done = 0.0;
                if clock_tx < dt {
                    let tx_time = off * 8.0 / rate;
                    let airtime = tx_time.min(dt - clock_tx);
                    pr.energy.transmit_j = transmit_j(airtime, params);
                    clock_tx += airtime;
                    let delivered = airtime >= tx_time;
                    if delivered && a > 0.0 {
                        let f = a * params.server_cpu_hz;
                        let start = clock_tx.max(clock_server[k]);
                        if start < dt {
                            done = off.min((dt - start) * f / params.cycles_per_byte);
                            clock_server[k] = start + done * params.cycles_per_byte / f;
                            pr.energy.server_j = server_compute_j(done * params.cycles_per_byte, a, params);
                            finish = finish.max(clock_server[k]);
                        }
                    }
                }
                pr.done_bytes += done;
            }
            pr.finish_s = finish;
            progress[k][i] = pr;
        }
    }

    if !orphans.is_empty() && opts.departure == DeparturePolicy::CompleteAtServer {
        let share = opts.orphan_share.min((1.0 - decision.alloc_sum()).max(0.0));
        if share > 0.0 {
            orphans.sort_by(by_arrival);
            let f = share * params.server_cpu_hz;
            let mut clock = 0.0;
            for &(k, i) in &orphans {
                if clock >= dt {
                    break;
                }
                let remaining = queues.queues[k][i].remaining_bytes;
                let done = remaining.min((dt - clock) * f / params.cycles_per_byte);
                clock += done * params.cycles_per_byte / f;
                progress[k][i] = Progress {
                    done_bytes: done,
                    finish_s: clock,
                    energy: EnergyBreakdown {
                        server_j: server_compute_j(done * params.cycles_per_byte, share, params),
                        ..Default::default()
                    },
                };
            }
        }
    }

    let mut outcome = SlotOutcome::empty(opts.slot, num_types);
    outcome.transmitting_vehicles = transmitting.len();
    let mut next = QueueState::new(num_types);
    for (k, q) in queues.queues.iter().enumerate() {
        for (i, pending) in q.iter().enumerate() {
            let pr = progress[k][i];
            let e = pr.energy.total();
            if e > 0.0 {
                outcome.task_energy_j.push((pending.task.id, e));
            }
            outcome.energy.transmit_j += pr.energy.transmit_j;
            outcome.energy.local_j += pr.energy.local_j;
            outcome.energy.server_j += pr.energy.server_j;

            let left = pending.remaining_bytes - pr.done_bytes;
            if left <= DONE_EPS_BYTES {
                outcome.served_bytes[k] += pending.remaining_bytes;
                let latency = (slot_start + pr.finish_s - pending.task.arrival_time_s(dt)).max(0.0);
                outcome.completions.push(TaskCompletion {
                    task_id: pending.task.id,
                    vehicle_id: pending.task.vehicle_id,
                    type_k: k,
                    latency_s: latency,
                    met_deadline: latency <= pending.task.deadline_s,
                });
            } else {
                outcome.served_bytes[k] += pr.done_bytes;
                let mut carried = pending.clone();
                carried.remaining_bytes = left;
                next.queues[k].push_back(carried);
            }
        }
    }
    outcome.slot_energy_j = outcome.energy.total();

    for t in new_tasks {
        outcome.arrived_bytes[t.type_k] += t.size_bytes as f64;
        next.push(t.clone());
    }
    outcome.backlog_bytes = next.backlog_bytes();
    Ok((next, outcome))
}
