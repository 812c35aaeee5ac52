//! Predictive digital twin: horizon-H forecasts of positions, uplink rates
//! and task arrivals, packed with the current backlogs into a
//! [`PredictiveState`].

pub mod accuracy;
pub mod arrivals;
pub mod mobility;

use std::collections::{BTreeMap, VecDeque};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use accuracy::{AccuracyTracker, PredictorAccuracy, TargetAccuracy};
pub use arrivals::{fit_ar1, Ar1Fit, ArrivalForecast, ArrivalModel};
pub use mobility::{constant_velocity, KalmanCv, MobilityModel};

use crate::error::{Error, Result};
use crate::sim::channel::{rate_at_position, ChannelState};
use crate::sim::{SimParams, SlotOutcome, World};

/// Bounded per-series history kept by the twin.
const HISTORY_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateMode {
    Model,
    Oracle,
    Reactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveState {
    /// Slot the forecasts start at (h = 1 is this slot).
    pub slot_index: u64,
    pub horizon: usize,
    pub mode: StateMode,
    pub vehicle_ids: Vec<u64>,
    pub current_positions_m: Vec<f64>,
    /// Rates at the current positions and channel, same bandwidth share.
    pub current_rates_bps: Vec<f64>,
    /// `[vehicle][h]`
    pub predicted_positions_m: Vec<Vec<f64>>,
    /// `[vehicle][h]`
    pub predicted_rates_bps: Vec<Vec<f64>>,
    /// Ẑ, `[type][h]`
    pub predicted_arrivals_bytes: Vec<Vec<f64>>,
    /// q, one entry per type (includes work of departed vehicles).
    pub current_backlogs_bytes: Vec<f64>,
    /// Pending bytes `[vehicle][type]` for the vehicles above.
    pub vehicle_backlogs_bytes: Vec<Vec<f64>>,
    /// Uplink bandwidth each vehicle is assumed to get.
    pub bandwidth_share_hz: f64,
    #[serde(default)]
    pub low_confidence: bool,
}

impl PredictiveState {
    pub fn num_vehicles(&self) -> usize {
        self.vehicle_ids.len()
    }

    pub fn num_types(&self) -> usize {
        self.current_backlogs_bytes.len()
    }

    /// Shape contract: `[N × H]` for per-vehicle series, `[K × H]` arrivals.
    pub fn check_shape(&self) -> Result<()> {
        let n = self.vehicle_ids.len();
        let h = self.horizon;
        let k = self.current_backlogs_bytes.len();
        let ok = self.current_positions_m.len() == n
            && self.current_rates_bps.len() == n
            && self.predicted_positions_m.len() == n
            && self.predicted_rates_bps.len() == n
            && self.vehicle_backlogs_bytes.len() == n
            && self.predicted_positions_m.iter().all(|r| r.len() == h)
            && self.predicted_rates_bps.iter().all(|r| r.len() == h)
            && self.vehicle_backlogs_bytes.iter().all(|r| r.len() == k)
            && self.predicted_arrivals_bytes.len() == k
            && self.predicted_arrivals_bytes.iter().all(|r| r.len() == h);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDecision("predictive state has inconsistent dimensions".into()))
        }
    }
}

/// Rates for predicted positions, holding the channel impairments fixed.
pub fn predict_rates(
    predicted_positions: &[Vec<f64>],
    channels: &[ChannelState],
    bandwidth_share_hz: f64,
    params: &SimParams,
) -> Vec<Vec<f64>> {
    predicted_positions
        .iter()
        .zip(channels)
        .map(|(row, ch)| {
            row.iter()
                .map(|&p| {
                    let p = p.clamp(0.0, params.segment_length_m);
                    rate_at_position(p, ch, bandwidth_share_hz, params)
                })
                .collect()
        })
        .collect()
}

/// Which forecasters back the twin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PredictorConfig {
    Model {
        mobility: MobilityModel,
        arrivals: ArrivalModel,
    },
    /// Reads the simulator's actual future (upper bound).
    Oracle,
    /// Current values repeated over the horizon (non-predictive twin).
    Reactive,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig::Model {
            mobility: MobilityModel::ConstantVelocity,
            arrivals: ArrivalModel::ar1(),
        }
    }
}

/// CLI-level predictor names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Cv,
    Kalman,
    Ar1,
    Ewma,
    Oracle,
    Reactive,
}

impl PredictorKind {
    pub fn config(self) -> PredictorConfig {
        use PredictorKind::*;
        match self {
            Cv => PredictorConfig::Model {
                mobility: MobilityModel::ConstantVelocity,
                arrivals: ArrivalModel::ewma(),
            },
            Kalman => PredictorConfig::Model {
                mobility: MobilityModel::Kalman(KalmanCv::default()),
                arrivals: ArrivalModel::ar1(),
            },
            Ar1 => PredictorConfig::Model {
                mobility: MobilityModel::ConstantVelocity,
                arrivals: ArrivalModel::ar1(),
            },
            Ewma => PredictorConfig::Model {
                mobility: MobilityModel::ConstantVelocity,
                arrivals: ArrivalModel::ewma(),
            },
            Oracle => PredictorConfig::Oracle,
            Reactive => PredictorConfig::Reactive,
        }
    }
}

impl FromStr for PredictorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cv" => PredictorKind::Cv,
            "kalman" => PredictorKind::Kalman,
            "ar1" => PredictorKind::Ar1,
            "ewma" => PredictorKind::Ewma,
            "oracle" => PredictorKind::Oracle,
            "reactive" => PredictorKind::Reactive,
            other => return Err(Error::Config(format!("unknown predictor `{other}`"))),
        })
    }
}

/// Per-run twin: owns the observation histories and the forecasters.
#[derive(Debug, Clone)]
pub struct Pdt {
    config: PredictorConfig,
    positions: BTreeMap<u64, VecDeque<f64>>,
    velocities: BTreeMap<u64, VecDeque<f64>>,
    arrivals: Vec<VecDeque<f64>>,
    arrivals_seen: usize,
    arrival_models: Vec<ArrivalModel>,
    accuracy: AccuracyTracker,
}

fn push_capped(q: &mut VecDeque<f64>, x: f64) {
    if q.len() == HISTORY_CAP {
        q.pop_front();
    }
    q.push_back(x);
}

impl Pdt {
    pub fn new(config: PredictorConfig, world: &World) -> Self {
        let k = world.params().num_task_types();
        let arrival_models = match &config {
            PredictorConfig::Model { arrivals, .. } => vec![arrivals.clone(); k],
            _ => Vec::new(),
        };
        let mut pdt = Pdt {
            config,
            positions: BTreeMap::new(),
            velocities: BTreeMap::new(),
            arrivals: vec![VecDeque::new(); k],
            arrivals_seen: 0,
            arrival_models,
            accuracy: AccuracyTracker::new(world.params().horizon),
        };
        pdt.observe_vehicles(world);
        pdt
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    fn observe_vehicles(&mut self, world: &World) {
        let alive: std::collections::HashSet<u64> = world.vehicles().iter().map(|v| v.id).collect();
        self.positions.retain(|id, _| alive.contains(id));
        self.velocities.retain(|id, _| alive.contains(id));
        for v in world.vehicles() {
            push_capped(self.positions.entry(v.id).or_default(), v.position_m);
            push_capped(self.velocities.entry(v.id).or_default(), v.velocity_mps);
        }
    }

    /// Feed the result of a finished slot.
    pub fn observe(&mut self, world: &World, outcome: &SlotOutcome) {
        self.observe_vehicles(world);
        for (q, &z) in self.arrivals.iter_mut().zip(&outcome.arrived_bytes) {
            push_capped(q, z);
        }
        self.arrivals_seen += 1;
        self.accuracy.record_realized(world, outcome);
    }

    pub fn accuracy(&self) -> PredictorAccuracy {
        self.accuracy.report()
    }

    pub fn assemble(&mut self, world: &World) -> PredictiveState {
        let state = assemble_state(world, self);
        self.accuracy.record_prediction(&state, world);
        state
    }

    fn arrival_history(&self, k: usize) -> Vec<f64> {
        self.arrivals[k].iter().copied().collect()
    }
}

/// Builds Ŝ(t) for the slot `world` will run next.
pub fn assemble_state(world: &World, pdt: &mut Pdt) -> PredictiveState {
    let params = world.params();
    let h_max = params.horizon;
    let k = params.num_task_types();
    let dt = params.slot_duration_s;
    let vehicles = world.vehicles();
    let ids: Vec<u64> = vehicles.iter().map(|v| v.id).collect();
    let share = params.bandwidth_hz / ids.len().max(1) as f64;
    let current_positions: Vec<f64> = vehicles.iter().map(|v| v.position_m).collect();
    let current_channels: Vec<ChannelState> = vehicles.iter().map(|v| v.channel).collect();
    let current_rates: Vec<f64> = vehicles
        .iter()
        .map(|v| rate_at_position(v.position_m, &v.channel, share, params))
        .collect();

    let backlogs = world.queues.backlog_bytes();
    let per_vehicle = world.queues.vehicle_backlogs();
    let vehicle_backlogs: Vec<Vec<f64>> = ids
        .iter()
        .map(|id| per_vehicle.get(id).cloned().unwrap_or_else(|| vec![0.0; k]))
        .collect();

    let mut low_confidence = false;
    let (positions, rates, arrivals) = match &pdt.config {
        PredictorConfig::Reactive => {
            let positions: Vec<Vec<f64>> = current_positions.iter().map(|&p| vec![p; h_max]).collect();
            let rates: Vec<Vec<f64>> = current_rates.iter().map(|&r| vec![r; h_max]).collect();
            let arrivals: Vec<Vec<f64>> = (0..k)
                .map(|ty| vec![pdt.arrivals[ty].back().copied().unwrap_or(0.0); h_max])
                .collect();
            (positions, rates, arrivals)
        }
        PredictorConfig::Oracle => {
            let mut exo = world.exo.clone();
            let mut positions = vec![Vec::with_capacity(h_max); ids.len()];
            let mut channels = vec![Vec::with_capacity(h_max); ids.len()];
            let mut arrivals = vec![Vec::with_capacity(h_max); k];
            let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
            let mut last_pos = current_positions.clone();
            let mut last_ch = current_channels.clone();
            let mut gone = vec![false; ids.len()];
            let mut departed = vec![Vec::with_capacity(h_max); ids.len()];
            for _ in 0..h_max {
                let ex = exo.advance();
                for v in &exo.vehicles {
                    if let Some(&i) = index.get(&v.id) {
                        last_pos[i] = v.position_m;
                        last_ch[i] = v.channel;
                    }
                }
                for &id in &ex.departed {
                    if let Some(&i) = index.get(&id) {
                        last_pos[i] = params.segment_length_m;
                        gone[i] = true;
                    }
                }
                for i in 0..ids.len() {
                    positions[i].push(last_pos[i]);
                    channels[i].push(last_ch[i]);
                    departed[i].push(gone[i]);
                }
                let mut z = vec![0.0; k];
                for t in &ex.new_tasks {
                    z[t.type_k] += t.size_bytes as f64;
                }
                for ty in 0..k {
                    arrivals[ty].push(z[ty]);
                }
            }
            // a vehicle that has left cannot transmit
            let rates = (0..ids.len())
                .map(|i| {
                    (0..h_max)
                        .map(|h| match departed[i][h] {
                            true => 0.0,
                            false => rate_at_position(positions[i][h].clamp(0.0, params.segment_length_m), &channels[i][h], share, params),
                        })
                        .collect()
                })
                .collect();
            (positions, rates, arrivals)
        }
        PredictorConfig::Model { mobility, .. } => {
            let mobility = *mobility;
            let positions: Vec<Vec<f64>> = vehicles
                .iter()
                .map(|v| {
                    let ph: Vec<f64> = pdt.positions.get(&v.id).map(|q| q.iter().copied().collect()).unwrap_or_default();
                    let vh: Vec<f64> = pdt.velocities.get(&v.id).map(|q| q.iter().copied().collect()).unwrap_or_default();
                    mobility.predict(&ph, &vh, h_max, dt).unwrap_or_else(|_| {
                        // fresh vehicle: extrapolate its reported speed
                        (1..=h_max).map(|h| v.position_m + v.velocity_mps * h as f64 * dt).collect()
                    })
                })
                .map(|row: Vec<f64>| row.into_iter().map(|p| p.clamp(0.0, params.segment_length_m)).collect())
                .collect();
            let rates = predict_rates(&positions, &current_channels, share, params);
            let seen = pdt.arrivals_seen;
            let mut arrivals = Vec::with_capacity(k);
            for ty in 0..k {
                let hist = pdt.arrival_history(ty);
                let f = pdt.arrival_models[ty].forecast(&hist, seen, h_max);
                low_confidence |= f.low_confidence;
                arrivals.push(f.values);
            }
            (positions, rates, arrivals)
        }
    };

    let mode = match pdt.config {
        PredictorConfig::Model { .. } => StateMode::Model,
        PredictorConfig::Oracle => StateMode::Oracle,
        PredictorConfig::Reactive => StateMode::Reactive,
    };
    PredictiveState {
        slot_index: world.slot(),
        horizon: h_max,
        mode,
        vehicle_ids: ids,
        current_positions_m: current_positions,
        current_rates_bps: current_rates,
        predicted_positions_m: positions,
        predicted_rates_bps: rates,
        predicted_arrivals_bytes: arrivals,
        current_backlogs_bytes: backlogs,
        vehicle_backlogs_bytes: vehicle_backlogs,
        bandwidth_share_hz: share,
        low_confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrators::Decision;
    use crate::sim::{Population, Volatility};

    fn world(vol: Option<Volatility>) -> World {
        World::new(SimParams::default(), 5, Population::Fixed(6), vol).unwrap()
    }

    fn run(world: &mut World, pdt: &mut Pdt, slots: usize) {
        for _ in 0..slots {
            let d = Decision::all_local(world.slot(), world.exo.vehicle_ids(), 2);
            let out = world.step(&d).unwrap();
            pdt.observe(world, &out);
        }
    }

    #[test]
    fn shapes_hold_in_every_mode() {
        for cfg in [PredictorConfig::default(), PredictorConfig::Oracle, PredictorConfig::Reactive] {
            let mut w = world(None);
            let mut pdt = Pdt::new(cfg, &w);
            run(&mut w, &mut pdt, 3);
            let s = pdt.assemble(&w);
            s.check_shape().unwrap();
            assert_eq!(s.predicted_positions_m.len(), 6);
            assert_eq!(s.predicted_arrivals_bytes.len(), 2);
            assert!(s.predicted_rates_bps.iter().flatten().all(|&r| r > 0.0));
            assert!(s.predicted_arrivals_bytes.iter().flatten().all(|&z| z >= 0.0));
            assert_eq!(s.current_backlogs_bytes, w.queues.backlog_bytes());
        }
    }

    #[test]
    fn reactive_repeats_current_positions() {
        let mut w = world(None);
        let mut pdt = Pdt::new(PredictorConfig::Reactive, &w);
        run(&mut w, &mut pdt, 4);
        let s = pdt.assemble(&w);
        for (row, &p) in s.predicted_positions_m.iter().zip(&s.current_positions_m) {
            assert!(row.iter().all(|&x| x == p));
        }
    }

    #[test]
    fn oracle_matches_realized_future() {
        let mut w = world(Some(Volatility::default()));
        let mut pdt = Pdt::new(PredictorConfig::Oracle, &w);
        run(&mut w, &mut pdt, 2);
        let s = pdt.assemble(&w);
        let mut realized_z = vec![vec![]; 2];
        let mut realized_rates: Vec<Vec<f64>> = vec![vec![]; s.vehicle_ids.len()];
        for _ in 0..s.horizon {
            let d = Decision::all_local(w.slot(), w.exo.vehicle_ids(), 2);
            let out = w.step(&d).unwrap();
            for k in 0..2 {
                realized_z[k].push(out.arrived_bytes[k]);
            }
            for (i, id) in s.vehicle_ids.iter().enumerate() {
                if let Some(v) = w.vehicles().iter().find(|v| v.id == *id) {
                    realized_rates[i].push(rate_at_position(v.position_m, &v.channel, s.bandwidth_share_hz, w.params()));
                }
            }
        }
        assert_eq!(s.predicted_arrivals_bytes, realized_z);
        for (i, row) in realized_rates.iter().enumerate() {
            for (h, r) in row.iter().enumerate() {
                assert_eq!(s.predicted_rates_bps[i][h], *r);
            }
        }
    }

    #[test]
    fn predictor_kind_parsing() {
        assert_eq!("kalman".parse::<PredictorKind>().unwrap(), PredictorKind::Kalman);
        assert!("lstm".parse::<PredictorKind>().is_err());
    }

    #[test]
    fn current_position_rate_consistency() {
        // predicted position equal to the current one gives the current rate
        let w = world(None);
        let p = w.params();
        let v = &w.vehicles()[0];
        let share = p.bandwidth_hz / 6.0;
        let r = predict_rates(&[vec![v.position_m]], &[v.channel], share, p);
        assert_eq!(r[0][0], rate_at_position(v.position_m, &v.channel, share, p));
    }
}
