//! Experiment harness: scenario presets, the slot loop, metrics and reports.

pub mod config;
pub mod metrics;
pub mod report;
pub mod runner;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{policy_is_semantic, ClientSpec, InterpreterChoice, LlmSection, PhaseSpec, ScenarioConfig, ScenarioId, DEFAULT_GOAL, ENERGY_SAVE_COMMAND};
pub use metrics::{aggregate, summarize_seed, Aggregate, PhaseSummary, SeedExtras, SeedSummary, SlotRecord};
pub use report::{emit_report, load_report, read_stream, render_tables, report_from_streams, write_stream};
pub use runner::{CommandReceipt, Simulation};

use crate::error::{Error, Result};

/// Everything one seed produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub records: Vec<SlotRecord>,
    pub summary: SeedSummary,
    pub extras: SeedExtras,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub scenario: ScenarioId,
    pub vehicles: usize,
    pub config: ScenarioConfig,
    pub per_seed: Vec<SeedSummary>,
    pub extras: Vec<SeedExtras>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn build(config: &ScenarioConfig, per_seed: Vec<SeedSummary>, extras: Vec<SeedExtras>) -> Result<Self> {
        let aggregate = aggregate(&per_seed)?;
        Ok(RunReport {
            label: config.label(),
            scenario: config.scenario,
            vehicles: config.num_vehicles_hint(),
            config: config.clone(),
            per_seed,
            extras,
            aggregate,
        })
    }
}

pub fn run_seed(cfg: &ScenarioConfig, seed: u64) -> Result<SeedRun> {
    let mut sim = Simulation::new(cfg.clone(), seed)?;
    let mut records = Vec::with_capacity(cfg.total_slots as usize);
    while !sim.is_finished() {
        records.push(sim.step()?);
    }
    let summary = summarize_seed(&records, &cfg.phases, cfg.violation_window, sim.initial_backlog_bytes())?;
    Ok(SeedRun {
        records,
        summary,
        extras: sim.extras(),
    })
}

/// Runs every seed (in parallel) and aggregates. Output order follows
/// `cfg.seeds`, so results do not depend on thread scheduling.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(RunReport, Vec<SeedRun>)> {
    cfg.validate()?;
    let work = || cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect::<Result<Vec<SeedRun>>>();
    let runs = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let report = RunReport::build(
        cfg,
        runs.iter().map(|r| r.summary.clone()).collect(),
        runs.iter().map(|r| r.extras.clone()).collect(),
    )?;
    Ok((report, runs))
}
