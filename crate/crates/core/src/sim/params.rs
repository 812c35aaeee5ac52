use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-distance path-loss model: `PL(d) = PL0 + 10·η·log10(d / d0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub reference_loss_db: f64,
    pub exponent: f64,
    pub reference_distance_m: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss {
            reference_loss_db: 30.0,
            exponent: 3.0,
            reference_distance_m: 1.0,
        }
    }
}

/// Physical-layer parameters. Everything is SI and linear (watts, Hz,
/// seconds); dBm / mW / km/h only appear in [`SimParamsFile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub bandwidth_hz: f64,
    pub server_cpu_hz: f64,
    pub vehicle_cpu_hz: f64,
    pub tx_power_w: f64,
    pub noise_power_w: f64,
    pub segment_length_m: f64,
    pub server_position_m: f64,
    /// Perpendicular distance from the road to the server antenna.
    pub server_offset_m: f64,
    pub speed_range_mps: (f64, f64),
    pub task_size_range_bytes: (u32, u32),
    pub cycles_per_byte: f64,
    pub slot_duration_s: f64,
    /// One deadline per task type; its length fixes K.
    pub deadline_s: Vec<f64>,
    /// Mean tasks per active vehicle per slot, one entry per task type.
    pub task_rate_per_slot: Vec<f64>,
    pub effective_capacitance: f64,
    /// Poisson mean of vehicles entering per slot.
    pub vehicle_arrival_rate: f64,
    pub horizon: usize,
    pub path_loss: PathLoss,
}

pub const KMH_TO_MPS: f64 = 1.0 / 3.6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            bandwidth_hz: 20e6,
            server_cpu_hz: 400e9,
            vehicle_cpu_hz: 5e9,
            tx_power_w: 0.2,
            noise_power_w: dbm_to_watts(-110.0),
            segment_length_m: 2000.0,
            server_position_m: 1000.0,
            server_offset_m: 10.0,
            speed_range_mps: (60.0 * KMH_TO_MPS, 100.0 * KMH_TO_MPS),
            task_size_range_bytes: (1000, 1500),
            cycles_per_byte: 0.25e6,
            slot_duration_s: 0.1,
            deadline_s: vec![0.15, 0.15],
            task_rate_per_slot: vec![0.3, 0.3],
            effective_capacitance: 1e-28,
            vehicle_arrival_rate: 0.05,
            horizon: 5,
            path_loss: PathLoss::default(),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}

impl SimParams {
    pub fn num_task_types(&self) -> usize {
        self.deadline_s.len()
    }

    /// Server CPU capacity plus `n_vehicles` local CPUs, in bytes per slot.
    pub fn capacity_bytes_per_slot(&self, n_vehicles: usize) -> f64 {
        (self.server_cpu_hz + n_vehicles as f64 * self.vehicle_cpu_hz) * self.slot_duration_s
            / self.cycles_per_byte
    }

    pub fn mean_task_size_bytes(&self) -> f64 {
        0.5 * (self.task_size_range_bytes.0 as f64 + self.task_size_range_bytes.1 as f64)
    }

    pub fn validate(&self) -> Result<()> {
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("server_cpu_hz", self.server_cpu_hz)?;
        positive("vehicle_cpu_hz", self.vehicle_cpu_hz)?;
        positive("tx_power_w", self.tx_power_w)?;
        positive("noise_power_w", self.noise_power_w)?;
        positive("segment_length_m", self.segment_length_m)?;
        positive("server_offset_m", self.server_offset_m)?;
        positive("cycles_per_byte", self.cycles_per_byte)?;
        positive("slot_duration_s", self.slot_duration_s)?;
        positive("effective_capacitance", self.effective_capacitance)?;
        positive("path_loss.reference_distance_m", self.path_loss.reference_distance_m)?;
        positive("path_loss.exponent", self.path_loss.exponent)?;
        positive("speed_range_mps.min", self.speed_range_mps.0)?;
        if !(self.server_position_m >= 0.0 && self.server_position_m <= self.segment_length_m) {
            return Err(Error::InvalidParam {
                name: "server_position_m",
                reason: "must lie on the segment".into(),
            });
        }
        if self.speed_range_mps.0 > self.speed_range_mps.1 {
            return Err(Error::InvalidParam {
                name: "speed_range_mps",
                reason: "min > max".into(),
            });
        }
        let (lo, hi) = self.task_size_range_bytes;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidParam {
                name: "task_size_range_bytes",
                reason: format!("need 0 < min <= max, got [{lo}, {hi}]"),
            });
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParam {
                name: "horizon",
                reason: "must be >= 1".into(),
            });
        }
        if self.deadline_s.is_empty() {
            return Err(Error::InvalidParam {
                name: "deadline_s",
                reason: "need at least one task type".into(),
            });
        }
        for &d in &self.deadline_s {
            positive("deadline_s", d)?;
        }
        if self.task_rate_per_slot.len() != self.deadline_s.len() {
            return Err(Error::InvalidParam {
                name: "task_rate_per_slot",
                reason: format!(
                    "length {} does not match number of task types {}",
                    self.task_rate_per_slot.len(),
                    self.deadline_s.len()
                ),
            });
        }
        if self
            .task_rate_per_slot
            .iter()
            .chain(std::iter::once(&self.vehicle_arrival_rate))
            .any(|r| !r.is_finite() || *r < 0.0)
        {
            return Err(Error::InvalidParam {
                name: "task_rate_per_slot",
                reason: "rates must be finite and >= 0".into(),
            });
        }
        Ok(())
    }
}

/// On-disk form of [`SimParams`]. Power is given in mW / dBm and speeds in
/// km/h, matching how the parameters are usually quoted; conversion to
/// linear SI happens here and nowhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParamsFile {
    pub bandwidth_mhz: f64,
    pub server_cpu_ghz: f64,
    pub vehicle_cpu_ghz: f64,
    pub tx_power_mw: f64,
    pub noise_power_dbm: f64,
    pub segment_length_m: f64,
    pub server_position_m: f64,
    pub server_offset_m: f64,
    pub speed_range_kmh: [f64; 2],
    pub task_size_range_bytes: [u32; 2],
    pub cycles_per_byte: f64,
    pub slot_duration_ms: f64,
    pub deadline_ms: Vec<f64>,
    pub task_rate_per_slot: Vec<f64>,
    pub effective_capacitance: f64,
    pub vehicle_arrival_rate: f64,
    pub horizon: usize,
    pub path_loss_ref_db: f64,
    pub path_loss_exponent: f64,
    pub path_loss_ref_distance_m: f64,
}

impl Default for SimParamsFile {
    fn default() -> Self {
        SimParamsFile::from(&SimParams::default())
    }
}

impl From<&SimParams> for SimParamsFile {
    fn from(p: &SimParams) -> Self {
        SimParamsFile {
            bandwidth_mhz: p.bandwidth_hz / 1e6,
            server_cpu_ghz: p.server_cpu_hz / 1e9,
            vehicle_cpu_ghz: p.vehicle_cpu_hz / 1e9,
            tx_power_mw: p.tx_power_w * 1e3,
            noise_power_dbm: watts_to_dbm(p.noise_power_w),
            segment_length_m: p.segment_length_m,
            server_position_m: p.server_position_m,
            server_offset_m: p.server_offset_m,
            speed_range_kmh: [p.speed_range_mps.0 * 3.6, p.speed_range_mps.1 * 3.6],
            task_size_range_bytes: [p.task_size_range_bytes.0, p.task_size_range_bytes.1],
            cycles_per_byte: p.cycles_per_byte,
            slot_duration_ms: p.slot_duration_s * 1e3,
            deadline_ms: p.deadline_s.iter().map(|d| d * 1e3).collect(),
            task_rate_per_slot: p.task_rate_per_slot.clone(),
            effective_capacitance: p.effective_capacitance,
            vehicle_arrival_rate: p.vehicle_arrival_rate,
            horizon: p.horizon,
            path_loss_ref_db: p.path_loss.reference_loss_db,
            path_loss_exponent: p.path_loss.exponent,
            path_loss_ref_distance_m: p.path_loss.reference_distance_m,
        }
    }
}

impl SimParamsFile {
    pub fn to_params(&self) -> Result<SimParams> {
        let p = SimParams {
            bandwidth_hz: self.bandwidth_mhz * 1e6,
            server_cpu_hz: self.server_cpu_ghz * 1e9,
            vehicle_cpu_hz: self.vehicle_cpu_ghz * 1e9,
            tx_power_w: self.tx_power_mw * 1e-3,
            noise_power_w: dbm_to_watts(self.noise_power_dbm),
            segment_length_m: self.segment_length_m,
            server_position_m: self.server_position_m,
            server_offset_m: self.server_offset_m,
            speed_range_mps: (
                self.speed_range_kmh[0] * KMH_TO_MPS,
                self.speed_range_kmh[1] * KMH_TO_MPS,
            ),
            task_size_range_bytes: (self.task_size_range_bytes[0], self.task_size_range_bytes[1]),
            cycles_per_byte: self.cycles_per_byte,
            slot_duration_s: self.slot_duration_ms * 1e-3,
            deadline_s: self.deadline_ms.iter().map(|d| d * 1e-3).collect(),
            task_rate_per_slot: self.task_rate_per_slot.clone(),
            effective_capacitance: self.effective_capacitance,
            vehicle_arrival_rate: self.vehicle_arrival_rate,
            horizon: self.horizon,
            path_loss: PathLoss {
                reference_loss_db: self.path_loss_ref_db,
                exponent: self.path_loss_exponent,
                reference_distance_m: self.path_loss_ref_distance_m,
            },
        };
        p.validate()?;
        Ok(p)
    }
}
