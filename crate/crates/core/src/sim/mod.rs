//! Physical layer: vehicles on a highway segment, the uplink channel, task
//! generation, the per-type server queues and per-slot accounting.

pub mod channel;
pub mod energy;
pub mod execute;
pub mod mobility;
pub mod params;
pub mod queue;
pub mod tasks;

use serde::{Deserialize, Serialize};

pub use channel::{achievable_rate, channel_gain, ChannelState};
pub use execute::{execute_slot, DeparturePolicy, EnergyBreakdown, ExecOptions, SlotOutcome, TaskCompletion};
pub use mobility::{advance_mobility, channel_state, spawn_vehicles, Volatility};
pub use params::{PathLoss, SimParams, SimParamsFile};
pub use queue::{lindley, PendingTask, QueueState};
pub use tasks::{generate_tasks, Task};

use crate::error::Result;
use crate::orchestrators::Decision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u64,
    /// Coordinate along the segment, metres from the entry point.
    pub position_m: f64,
    pub velocity_mps: f64,
    pub active: bool,
    /// Impairments in effect for the current slot.
    #[serde(default)]
    pub channel: ChannelState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Population {
    /// Constant count: every departure is replaced by a vehicle entering at 0.
    Fixed(usize),
    /// Poisson entries at `SimParams::vehicle_arrival_rate`, starting from
    /// `initial` vehicles spread over the segment.
    Poisson { initial: usize },
}

/// The decision-independent part of the world: who is where, what the
/// channel does and which tasks appear. Cloning it and stepping forward is
/// how the oracle predictor reads the future.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exogenous {
    pub params: SimParams,
    pub seed: u64,
    /// Index of the next slot to run.
    pub slot: u64,
    pub vehicles: Vec<VehicleState>,
    pub population: Population,
    pub volatility: Option<Volatility>,
    next_vehicle_id: u64,
    next_task_id: u64,
}

/// Everything that happened outside the queues during one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousSlot {
    pub slot: u64,
    pub departed: Vec<u64>,
    pub new_tasks: Vec<Task>,
}

impl Exogenous {
    pub fn new(params: SimParams, seed: u64, population: Population, volatility: Option<Volatility>) -> Result<Self> {
        params.validate()?;
        let initial = match population {
            Population::Fixed(n) => n,
            Population::Poisson { initial } => initial,
        };
        let vehicles = mobility::place_initial(&params, seed, initial, 0);
        let mut exo = Exogenous {
            params,
            seed,
            slot: 0,
            vehicles,
            population,
            volatility,
            next_vehicle_id: initial as u64,
            next_task_id: 0,
        };
        for v in exo.vehicles.iter_mut() {
            v.channel = channel_state(seed, 0, v.id, exo.volatility.as_ref());
        }
        Ok(exo)
    }

    /// spawn → mobility → departures (refilled for a fixed population) →
    /// channel → task generation.
    pub fn advance(&mut self) -> ExogenousSlot {
        let slot = self.slot;
        let p = &self.params;
        if let Population::Poisson { .. } = self.population {
            let fresh = spawn_vehicles(p, self.seed, slot, self.next_vehicle_id);
            self.next_vehicle_id += fresh.len() as u64;
            self.vehicles.extend(fresh);
        }
        if let Some(vol) = &self.volatility {
            if vol.speed_redraw_interval > 0 && slot > 0 && slot.is_multiple_of(vol.speed_redraw_interval) {
                mobility::redraw_speeds(&mut self.vehicles, p, self.seed, slot);
            }
        }
        advance_mobility(&mut self.vehicles, p, p.slot_duration_s);
        let departed: Vec<u64> = self.vehicles.iter().filter(|v| !v.active).map(|v| v.id).collect();
        self.vehicles.retain(|v| v.active);
        if let Population::Fixed(n) = self.population {
            let missing = n.saturating_sub(self.vehicles.len());
            if missing > 0 {
                let fresh = mobility::spawn_replacements(&self.params, self.seed, slot, self.next_vehicle_id, missing);
                self.next_vehicle_id += fresh.len() as u64;
                self.vehicles.extend(fresh);
            }
        }
        for v in self.vehicles.iter_mut() {
            v.channel = channel_state(self.seed, slot, v.id, self.volatility.as_ref());
        }
        let new_tasks = generate_tasks(&self.vehicles, p, self.seed, slot, self.next_task_id);
        self.next_task_id += new_tasks.len() as u64;
        self.slot += 1;
        ExogenousSlot {
            slot,
            departed,
            new_tasks,
        }
    }

    pub fn vehicle_ids(&self) -> Vec<u64> {
        self.vehicles.iter().map(|v| v.id).collect()
    }
}

/// Full simulation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub exo: Exogenous,
    pub queues: QueueState,
    pub departure: DeparturePolicy,
    pub orphan_share: f64,
}

impl World {
    pub fn new(params: SimParams, seed: u64, population: Population, volatility: Option<Volatility>) -> Result<Self> {
        let k = params.num_task_types();
        Ok(World {
            exo: Exogenous::new(params, seed, population, volatility)?,
            queues: QueueState::new(k),
            departure: DeparturePolicy::CompleteAtServer,
            orphan_share: ExecOptions::new(0).orphan_share,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.exo.params
    }

    /// Index of the slot the next `step` will run.
    pub fn slot(&self) -> u64 {
        self.exo.slot
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.exo.vehicles
    }

    /// Advances one slot under `decision`.
    pub fn step(&mut self, decision: &Decision) -> Result<SlotOutcome> {
        decision.validate(self.params().num_task_types())?;
        let ex = self.exo.advance();
        let mut dropped = vec![0.0; self.queues.num_types()];
        if self.departure == DeparturePolicy::Drop && !ex.departed.is_empty() {
            let alive: std::collections::HashSet<u64> = self.exo.vehicle_ids().into_iter().collect();
            dropped = self.queues.drop_vehicles_not_in(&|id| alive.contains(&id));
        }
        let opts = ExecOptions {
            slot: ex.slot,
            departure: self.departure,
            orphan_share: self.orphan_share,
        };
        let (next, mut outcome) = execute_slot(
            &self.queues,
            &ex.new_tasks,
            decision,
            &self.exo.vehicles,
            &self.exo.params,
            &opts,
        )?;
        outcome.dropped_bytes = dropped;
        self.queues = next;
        Ok(outcome)
    }
}
