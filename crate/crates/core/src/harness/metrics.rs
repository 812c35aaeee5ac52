//! Per-slot records and their aggregation.

use serde::{Deserialize, Serialize};

use super::config::PhaseSpec;
use crate::error::{Error, Result};
use crate::pdt::PredictorAccuracy;
use crate::semantics::CommandClass;

/// One recorded slot. This is also the wire format of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub seed: u64,
    /// Recorded slot number, from 1.
    pub slot: u64,
    /// Underlying simulator slot (includes warm-up).
    pub world_slot: u64,
    pub policy: String,
    pub vehicles: usize,
    pub completed: usize,
    /// Sum of completed-task latencies in this slot.
    pub latency_sum_ms: f64,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
    pub violations: usize,
    pub energy_j: f64,
    pub transmit_j: f64,
    pub local_j: f64,
    pub server_j: f64,
    pub arrived_bytes: Vec<f64>,
    pub served_bytes: Vec<f64>,
    pub dropped_bytes: Vec<f64>,
    /// Per-type backlog after the slot.
    pub backlog_bytes: Vec<f64>,
    pub offloaded_pairs: usize,
    pub alloc_sum: f64,
    pub beta_e: f64,
    pub beta_q: f64,
    pub command_class: CommandClass,
    pub fallback: bool,
    pub stale: bool,
    /// Command that took effect at this slot, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub name: String,
    pub from: u64,
    pub to: u64,
    pub mean_latency_ms: f64,
    pub mean_energy_j: f64,
    pub violation_rate_pct: f64,
    pub completed: u64,
}

/// Aggregates of one seed's stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub slots: u64,
    pub completed: u64,
    /// Over all completed tasks.
    pub mean_latency_ms: f64,
    /// Population std-dev of per-slot mean latency (slots with completions).
    pub latency_std_ms: f64,
    pub violation_rate_pct: f64,
    /// Highest violation rate over tumbling windows.
    pub peak_violation_pct: f64,
    pub total_energy_j: f64,
    pub mean_energy_j: f64,
    pub arrived_bytes: f64,
    pub served_bytes: f64,
    pub dropped_bytes: f64,
    /// Total backlog just before the first recorded slot.
    pub initial_backlog_bytes: f64,
    pub final_backlog_bytes: f64,
    pub max_backlog_bytes: f64,
    pub fallbacks: u64,
    pub stale_slots: u64,
    pub phases: Vec<PhaseSummary>,
}

impl SeedSummary {
    /// arrived − served − dropped − Δbacklog; zero up to rounding.
    pub fn conservation_residual(&self) -> f64 {
        self.arrived_bytes - self.served_bytes - self.dropped_bytes - (self.final_backlog_bytes - self.initial_backlog_bytes)
    }
}

/// Model-call counters and predictor accuracy for one seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedExtras {
    pub llm_calls: u64,
    pub llm_fallbacks: u64,
    pub llm_stale_slots: u64,
    pub accuracy: Option<PredictorAccuracy>,
}

fn pct(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        100.0 * num / den
    } else {
        0.0
    }
}

fn phase_summary(records: &[SlotRecord], ph: &PhaseSpec) -> PhaseSummary {
    let sel: Vec<&SlotRecord> = records.iter().filter(|r| r.slot >= ph.from && r.slot <= ph.to).collect();
    let completed: usize = sel.iter().map(|r| r.completed).sum();
    let lat: f64 = sel.iter().map(|r| r.latency_sum_ms).sum();
    let viol: usize = sel.iter().map(|r| r.violations).sum();
    let energy: f64 = sel.iter().map(|r| r.energy_j).sum();
    PhaseSummary {
        name: ph.name.clone(),
        from: ph.from,
        to: ph.to,
        mean_latency_ms: if completed > 0 { lat / completed as f64 } else { 0.0 },
        mean_energy_j: if sel.is_empty() { 0.0 } else { energy / sel.len() as f64 },
        violation_rate_pct: pct(viol as f64, completed as f64),
        completed: completed as u64,
    }
}

/// Reduces one seed's stream. `initial_backlog_bytes` is the total
/// backlog when recording started.
pub fn summarize_seed(records: &[SlotRecord], phases: &[PhaseSpec], window: u64, initial_backlog_bytes: f64) -> Result<SeedSummary> {
    let first = records.first().ok_or(Error::EmptyStream)?;
    let window = window.max(1) as usize;
    let completed: usize = records.iter().map(|r| r.completed).sum();
    let lat_sum: f64 = records.iter().map(|r| r.latency_sum_ms).sum();
    let viol: usize = records.iter().map(|r| r.violations).sum();
    let energy: f64 = records.iter().map(|r| r.energy_j).sum();

    let slot_means: Vec<f64> = records.iter().filter(|r| r.completed > 0).map(|r| r.mean_latency_ms).collect();
    let latency_std_ms = if slot_means.is_empty() {
        0.0
    } else {
        let m = slot_means.iter().sum::<f64>() / slot_means.len() as f64;
        (slot_means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / slot_means.len() as f64).sqrt()
    };

    let peak_violation_pct = records
        .chunks(window)
        .map(|w| {
            let c: usize = w.iter().map(|r| r.completed).sum();
            let v: usize = w.iter().map(|r| r.violations).sum();
            pct(v as f64, c as f64)
        })
        .fold(0.0, f64::max);

    let total = |f: fn(&SlotRecord) -> &Vec<f64>| records.iter().map(|r| f(r).iter().sum::<f64>()).sum::<f64>();
    let backlog = |r: &SlotRecord| r.backlog_bytes.iter().sum::<f64>();

    Ok(SeedSummary {
        seed: first.seed,
        slots: records.len() as u64,
        completed: completed as u64,
        mean_latency_ms: if completed > 0 { lat_sum / completed as f64 } else { 0.0 },
        latency_std_ms,
        violation_rate_pct: pct(viol as f64, completed as f64),
        peak_violation_pct,
        total_energy_j: energy,
        mean_energy_j: energy / records.len() as f64,
        arrived_bytes: total(|r| &r.arrived_bytes),
        served_bytes: total(|r| &r.served_bytes),
        dropped_bytes: total(|r| &r.dropped_bytes),
        initial_backlog_bytes,
        final_backlog_bytes: records.last().map(backlog).unwrap_or(0.0),
        max_backlog_bytes: records.iter().map(backlog).fold(0.0, f64::max),
        fallbacks: records.iter().filter(|r| r.fallback).count() as u64,
        stale_slots: records.iter().filter(|r| r.stale).count() as u64,
        phases: phases.iter().map(|ph| phase_summary(records, ph)).collect(),
    })
}

/// Cross-seed aggregate: every field is the arithmetic mean of the
/// per-seed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: usize,
    pub mean_latency_ms: f64,
    pub latency_std_ms: f64,
    pub violation_rate_pct: f64,
    pub peak_violation_pct: f64,
    pub total_energy_j: f64,
    pub mean_energy_j: f64,
    pub completed: f64,
    pub fallbacks: f64,
    pub stale_slots: f64,
    pub phases: Vec<PhaseSummary>,
}

pub fn aggregate(per_seed: &[SeedSummary]) -> Result<Aggregate> {
    let first = per_seed.first().ok_or(Error::EmptyStream)?;
    let n = per_seed.len() as f64;
    let mean = |f: &dyn Fn(&SeedSummary) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
    let phases = first
        .phases
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let pm = |f: &dyn Fn(&PhaseSummary) -> f64| per_seed.iter().map(|s| f(&s.phases[i])).sum::<f64>() / n;
            PhaseSummary {
                name: p.name.clone(),
                from: p.from,
                to: p.to,
                mean_latency_ms: pm(&|p| p.mean_latency_ms),
                mean_energy_j: pm(&|p| p.mean_energy_j),
                violation_rate_pct: pm(&|p| p.violation_rate_pct),
                completed: (pm(&|p| p.completed as f64)).round() as u64,
            }
        })
        .collect();
    Ok(Aggregate {
        seeds: per_seed.len(),
        mean_latency_ms: mean(&|s| s.mean_latency_ms),
        latency_std_ms: mean(&|s| s.latency_std_ms),
        violation_rate_pct: mean(&|s| s.violation_rate_pct),
        peak_violation_pct: mean(&|s| s.peak_violation_pct),
        total_energy_j: mean(&|s| s.total_energy_j),
        mean_energy_j: mean(&|s| s.mean_energy_j),
        completed: mean(&|s| s.completed as f64),
        fallbacks: mean(&|s| s.fallbacks as f64),
        stale_slots: mean(&|s| s.stale_slots as f64),
        phases,
    })
}
