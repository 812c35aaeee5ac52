//! One live run: a dedicated thread owning the simulation, driven by a
//! control queue drained at slot boundaries.

use std::path::PathBuf;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;
use vecorch::harness::{emit_report, summarize_seed, CommandReceipt, RunReport, ScenarioConfig, SeedRun, Simulation, SlotRecord};
use vecorch::BetaWeights;

use crate::feed::Feed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Paused,
    Finished,
    Failed,
}

impl RunStatus {
    pub fn is_active(self) -> bool {
        matches!(self, RunStatus::Running | RunStatus::Paused)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHandle {
    pub run_id: u64,
    pub status: RunStatus,
    /// Recorded slots completed.
    pub slot: u64,
    pub total_slots: u64,
    pub seed: u64,
    pub policy: String,
    pub beta: BetaWeights,
    pub goal_text: String,
    /// `None` when unthrottled.
    pub slots_per_second: Option<f64>,
    pub pause_at_slot: Option<u64>,
    pub error: Option<String>,
    pub config: ScenarioConfig,
}

/// Last message on a metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    pub run_id: u64,
    pub status: RunStatus,
    pub slots: u64,
    /// Report over the slots that ran; absent if none did.
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

pub(crate) enum Msg {
    Pause(oneshot::Sender<RunHandle>),
    Resume(oneshot::Sender<RunHandle>),
    Stop(oneshot::Sender<RunHandle>),
    Command(String, oneshot::Sender<CommandReceipt>),
}

pub struct Run {
    handle: Mutex<RunHandle>,
    pub feed: Arc<Feed>,
    tx: mpsc::Sender<Msg>,
}

impl Run {
    pub fn snapshot(&self) -> RunHandle {
        self.handle.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn update(&self, f: impl FnOnce(&mut RunHandle)) {
        f(&mut self.handle.lock().unwrap_or_else(|e| e.into_inner()));
    }

    pub fn status(&self) -> RunStatus {
        self.handle.lock().unwrap_or_else(|e| e.into_inner()).status
    }

    /// Sends a control message and waits for the run loop's answer. `None`
    /// when the loop has already exited.
    pub(crate) async fn ask<T>(&self, make: impl FnOnce(oneshot::Sender<T>) -> Msg) -> Option<T> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(make(tx)).ok()?;
        rx.await.ok()
    }
}

pub(crate) struct LaunchSpec {
    pub run_id: u64,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub slots_per_second: Option<f64>,
    pub pause_at_slot: Option<u64>,
    pub replay_window: usize,
    pub out_dir: Option<PathBuf>,
}

/// Builds the simulation on its own thread (warm-up included) and starts
/// the loop. Resolves once the run is ready or has failed to build, with
/// the handle as it stood before the first slot.
pub(crate) async fn launch(spec: LaunchSpec) -> Result<(Arc<Run>, RunHandle), String> {
    let (ready_tx, ready_rx) = oneshot::channel();
    std::thread::Builder::new()
        .name(format!("run-{}", spec.run_id))
        .spawn(move || {
            let sim = match Simulation::new(spec.config.clone(), spec.seed) {
                Ok(s) => s,
                Err(e) => {
                    let _ = ready_tx.send(Err(e.to_string()));
                    return;
                }
            };
            let (tx, rx) = mpsc::channel();
            let run = Arc::new(Run {
                handle: Mutex::new(RunHandle {
                    run_id: spec.run_id,
                    status: RunStatus::Running,
                    slot: 0,
                    total_slots: spec.config.total_slots,
                    seed: spec.seed,
                    policy: spec.config.label(),
                    beta: sim.beta().clone(),
                    goal_text: sim.goal_text().to_string(),
                    slots_per_second: spec.slots_per_second,
                    pause_at_slot: spec.pause_at_slot,
                    error: None,
                    config: spec.config.clone(),
                }),
                feed: Feed::new(spec.replay_window),
                tx,
            });
            if ready_tx.send(Ok((Arc::clone(&run), run.snapshot()))).is_err() {
                return;
            }
            drive(sim, &run, rx, &spec);
        })
        .map_err(|e| e.to_string())?;
    ready_rx.await.map_err(|_| "run thread exited during start".to_string())?
}

fn drive(mut sim: Simulation, run: &Run, rx: mpsc::Receiver<Msg>, spec: &LaunchSpec) {
    let period = spec.slots_per_second.map(|r| Duration::from_secs_f64(1.0 / r));
    let mut records: Vec<SlotRecord> = Vec::new();
    let mut paused = false;
    let mut stop_waiters = Vec::new();
    let mut error = None;
    let mut due = Instant::now();

    while !sim.is_finished() {
        let msg = if paused {
            match rx.recv() {
                Ok(m) => Some(m),
                Err(_) => break,
            }
        } else {
            match rx.recv_timeout(due.saturating_duration_since(Instant::now())) {
                Ok(m) => Some(m),
                Err(RecvTimeoutError::Timeout) => None,
                Err(RecvTimeoutError::Disconnected) => break,
            }
        };
        if let Some(msg) = msg {
            match msg {
                Msg::Pause(reply) => {
                    paused = true;
                    run.update(|h| h.status = RunStatus::Paused);
                    let _ = reply.send(run.snapshot());
                }
                Msg::Resume(reply) => {
                    paused = false;
                    due = Instant::now();
                    run.update(|h| h.status = RunStatus::Running);
                    let _ = reply.send(run.snapshot());
                }
                Msg::Stop(reply) => {
                    stop_waiters.push(reply);
                    break;
                }
                Msg::Command(text, reply) => {
                    let _ = reply.send(sim.issue_command(&text));
                }
            }
            continue;
        }

        match sim.step() {
            Ok(rec) => {
                let t = rec.slot;
                records.push(rec.clone());
                run.feed.push(rec);
                let pause_here = spec.pause_at_slot == Some(t);
                paused |= pause_here;
                run.update(|h| {
                    h.slot = t;
                    h.beta = sim.beta().clone();
                    h.goal_text = sim.goal_text().to_string();
                    if pause_here {
                        h.status = RunStatus::Paused;
                    }
                });
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
        if let Some(p) = period {
            due = (due + p).max(Instant::now());
        }
    }

    let status = if error.is_some() { RunStatus::Failed } else { RunStatus::Finished };
    let report = finish_report(&sim, records, spec, &mut error);
    run.update(|h| {
        h.status = status;
        h.error = error.clone();
    });
    run.feed.finish(TerminalRecord {
        run_id: spec.run_id,
        status,
        slots: sim.recorded_slots(),
        report,
        error,
    });
    let snap = run.snapshot();
    for w in stop_waiters {
        let _ = w.send(snap.clone());
    }
    // answer anything that raced with the end of the run
    while let Ok(msg) = rx.try_recv() {
        match msg {
            Msg::Pause(r) | Msg::Resume(r) | Msg::Stop(r) => {
                let _ = r.send(snap.clone());
            }
            Msg::Command(..) => {}
        }
    }
}

fn finish_report(sim: &Simulation, records: Vec<SlotRecord>, spec: &LaunchSpec, error: &mut Option<String>) -> Option<RunReport> {
    if records.is_empty() {
        return None;
    }
    let cfg = sim.config();
    let phases: Vec<_> = cfg.phases.iter().filter(|p| p.to <= sim.recorded_slots()).cloned().collect();
    let summary = match summarize_seed(&records, &phases, cfg.violation_window, sim.initial_backlog_bytes()) {
        Ok(s) => s,
        Err(e) => {
            error.get_or_insert(e.to_string());
            return None;
        }
    };
    let extras = sim.extras();
    let report = RunReport::build(cfg, vec![summary.clone()], vec![extras.clone()]).ok()?;
    if let Some(dir) = &spec.out_dir {
        let runs = [SeedRun { records, summary, extras }];
        if let Err(e) = emit_report(&report, Some(&runs), &dir.join(format!("run-{}", spec.run_id))) {
            log::warn!("run {}: could not write report: {e}", spec.run_id);
        }
    }
    Some(report)
}
