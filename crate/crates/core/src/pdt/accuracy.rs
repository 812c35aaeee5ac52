//! Forecast error bookkeeping: predictions are matched against what the
//! simulator actually produced once each target slot has run.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::PredictiveState;
use crate::sim::channel::rate_at_position;
use crate::sim::{SlotOutcome, World};

/// MAPE ignores targets whose magnitude is below this.
const MAPE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetAccuracy {
    /// Mean absolute error per lead time h = 1..H (None without samples).
    pub mae: Vec<Option<f64>>,
    /// Mean absolute percentage error per lead time (None when undefined).
    pub mape: Vec<Option<f64>>,
    pub samples: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictorAccuracy {
    pub positions_m: TargetAccuracy,
    pub rates_bps: TargetAccuracy,
    pub arrivals_bytes: TargetAccuracy,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    abs: Vec<f64>,
    pct: Vec<f64>,
    n: Vec<u64>,
    pct_n: Vec<u64>,
}

impl Acc {
    fn new(h: usize) -> Self {
        Acc {
            abs: vec![0.0; h],
            pct: vec![0.0; h],
            n: vec![0; h],
            pct_n: vec![0; h],
        }
    }

    fn add(&mut self, h: usize, predicted: f64, actual: f64) {
        let e = (predicted - actual).abs();
        self.abs[h] += e;
        self.n[h] += 1;
        if actual.abs() > MAPE_FLOOR {
            self.pct[h] += e / actual.abs();
            self.pct_n[h] += 1;
        }
    }

    fn report(&self) -> TargetAccuracy {
        let div = |s: f64, n: u64| (n > 0).then(|| s / n as f64);
        TargetAccuracy {
            mae: self.abs.iter().zip(&self.n).map(|(&s, &n)| div(s, n)).collect(),
            mape: self.pct.iter().zip(&self.pct_n).map(|(&s, &n)| div(s, n).map(|x| 100.0 * x)).collect(),
            samples: self.n.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Pending {
    made_at: u64,
    vehicle_ids: Vec<u64>,
    positions: Vec<Vec<f64>>,
    rates: Vec<Vec<f64>>,
    share: f64,
    arrivals: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct AccuracyTracker {
    horizon: usize,
    pending: VecDeque<Pending>,
    positions: Acc,
    rates: Acc,
    arrivals: Acc,
}

impl AccuracyTracker {
    pub fn new(horizon: usize) -> Self {
        AccuracyTracker {
            horizon,
            pending: VecDeque::new(),
            positions: Acc::new(horizon),
            rates: Acc::new(horizon),
            arrivals: Acc::new(horizon),
        }
    }

    pub fn record_prediction(&mut self, state: &PredictiveState, world: &World) {
        debug_assert_eq!(state.slot_index, world.slot());
        self.pending.push_back(Pending {
            made_at: state.slot_index,
            vehicle_ids: state.vehicle_ids.clone(),
            positions: state.predicted_positions_m.clone(),
            rates: state.predicted_rates_bps.clone(),
            share: state.bandwidth_share_hz,
            arrivals: state.predicted_arrivals_bytes.clone(),
        });
    }

    /// Call after the world has run slot `outcome.slot`.
    pub fn record_realized(&mut self, world: &World, outcome: &SlotOutcome) {
        let s = outcome.slot;
        let h_max = self.horizon as u64;
        while self.pending.front().is_some_and(|p| p.made_at + h_max <= s) {
            self.pending.pop_front();
        }
        let params = world.params();
        for p in &self.pending {
            if p.made_at > s {
                continue;
            }
            let h = (s - p.made_at) as usize;
            for (k, row) in p.arrivals.iter().enumerate() {
                if let (Some(&z_hat), Some(&z)) = (row.get(h), outcome.arrived_bytes.get(k)) {
                    self.arrivals.add(h, z_hat, z);
                }
            }
            for (i, id) in p.vehicle_ids.iter().enumerate() {
                // departed vehicles have no realized position to score against
                let Some(v) = world.vehicles().iter().find(|v| v.id == *id) else { continue };
                self.positions.add(h, p.positions[i][h], v.position_m);
                let actual = rate_at_position(v.position_m, &v.channel, p.share, params);
                self.rates.add(h, p.rates[i][h], actual);
            }
        }
    }

    pub fn report(&self) -> PredictorAccuracy {
        PredictorAccuracy {
            positions_m: self.positions.report(),
            rates_bps: self.rates.report(),
            arrivals_bytes: self.arrivals.report(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acc_oracle_values() {
        let mut a = Acc::new(2);
        a.add(0, 110.0, 100.0);
        a.add(0, 90.0, 100.0);
        a.add(1, 5.0, 0.0);
        let r = a.report();
        assert_eq!(r.mae, vec![Some(10.0), Some(5.0)]);
        assert!((r.mape[0].unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(r.mape[1], None);
        assert_eq!(r.samples, vec![2, 1]);
    }
}
