//! Live-run control service: start, pause, resume and stop simulation runs,
//! inject operator commands between slots, and stream per-slot records
//! over server-sent events.
//!
//! Payload schemas are documented in `docs/api.md`.

pub mod api;
pub mod feed;
pub mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use vecorch::harness::{CommandReceipt, ScenarioConfig, ScenarioId};
use vecorch::{PolicyKind, PredictorKind};

pub use api::{router, ApiError};
pub use feed::{FeedItem, Subscription};
pub use run::{RunHandle, RunStatus, TerminalRecord};

use run::{launch, LaunchSpec, Msg, Run};

pub const DEFAULT_REPLAY_WINDOW: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Runs that may be running or paused at once.
    pub max_concurrent: usize,
    pub replay_window: usize,
    /// Default pacing for runs that do not set their own. `None` runs as
    /// fast as the solver allows.
    pub slots_per_second: Option<f64>,
    /// Where finished runs write their report and stream.
    pub out_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_concurrent: 4,
            replay_window: DEFAULT_REPLAY_WINDOW,
            slots_per_second: Some(10.0),
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRequest {
    pub scenario: ScenarioId,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default)]
    pub vehicles: Option<usize>,
    #[serde(default)]
    pub predictor: Option<PredictorKind>,
    #[serde(default)]
    pub total_slots: Option<u64>,
}

fn default_policy() -> PolicyKind {
    PolicyKind::Sp
}

/// Body of `POST /runs`. With neither `config` nor `preset`, the default
/// custom scenario runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartRequest {
    pub config: Option<ScenarioConfig>,
    pub preset: Option<PresetRequest>,
    /// Defaults to the config's first seed.
    pub seed: Option<u64>,
    /// Overrides the service default; `0` means unthrottled.
    pub slots_per_second: Option<f64>,
    /// Pause automatically once this recorded slot completes.
    pub pause_at_slot: Option<u64>,
}

impl StartRequest {
    pub fn resolve(&self) -> Result<ScenarioConfig, ApiError> {
        let cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => return Err(ApiError::invalid_config("give either `config` or `preset`, not both")),
            (Some(c), None) => c.clone(),
            (None, Some(p)) => {
                let mut c = ScenarioConfig::preset(p.scenario, p.policy, p.vehicles);
                if let Some(pr) = p.predictor {
                    c.predictor = pr;
                }
                if let Some(t) = p.total_slots {
                    c.total_slots = t;
                    // a shortened run drops the phases it no longer covers
                    c.phases.retain(|ph| ph.to <= t);
                }
                c
            }
            (None, None) => ScenarioConfig::default(),
        };
        cfg.validate().map_err(|e| ApiError::invalid_config(e.to_string()))?;
        if let Some(r) = self.slots_per_second {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(ApiError::invalid_config("slots_per_second must be a non-negative number"));
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRequest {
    pub text: String,
}

pub struct Service {
    cfg: ServiceConfig,
    runs: Mutex<BTreeMap<u64, Arc<Run>>>,
}

impl Service {
    pub fn new(cfg: ServiceConfig) -> Arc<Self> {
        Arc::new(Service {
            cfg,
            runs: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    /// Validates, checks capacity and launches. Returns once the run's
    /// warm-up is done and slot 1 is about to start.
    pub async fn start(&self, req: StartRequest) -> Result<RunHandle, ApiError> {
        let config = req.resolve()?;
        // held across the launch so concurrent starts cannot overshoot
        let mut runs = self.runs.lock().await;
        let active = runs.values().filter(|r| r.status().is_active()).count();
        if active >= self.cfg.max_concurrent {
            return Err(ApiError::capacity(self.cfg.max_concurrent));
        }
        let run_id = runs.keys().next_back().map_or(1, |k| k + 1);
        let pace = req.slots_per_second.or(self.cfg.slots_per_second).filter(|&r| r > 0.0);
        let (run, handle) = launch(LaunchSpec {
            run_id,
            seed: req.seed.unwrap_or(config.seeds[0]),
            config,
            slots_per_second: pace,
            pause_at_slot: req.pause_at_slot,
            replay_window: self.cfg.replay_window,
            out_dir: self.cfg.out_dir.clone(),
        })
        .await
        .map_err(ApiError::invalid_config)?;
        runs.insert(run_id, run);
        Ok(handle)
    }

    async fn get_run(&self, id: u64) -> Result<Arc<Run>, ApiError> {
        self.runs.lock().await.get(&id).cloned().ok_or(ApiError::not_found(id))
    }

    pub async fn list(&self) -> Vec<RunHandle> {
        self.runs.lock().await.values().map(|r| r.snapshot()).collect()
    }

    pub async fn status(&self, id: u64) -> Result<RunHandle, ApiError> {
        Ok(self.get_run(id).await?.snapshot())
    }

    async fn control(&self, id: u64, make: fn(tokio::sync::oneshot::Sender<RunHandle>) -> Msg) -> Result<RunHandle, ApiError> {
        let run = self.get_run(id).await?;
        if !run.status().is_active() {
            return Err(ApiError::invalid_state(id, run.status()));
        }
        Ok(match run.ask(make).await {
            Some(h) => h,
            None => run.snapshot(),
        })
    }

    pub async fn pause(&self, id: u64) -> Result<RunHandle, ApiError> {
        self.control(id, Msg::Pause).await
    }

    pub async fn resume(&self, id: u64) -> Result<RunHandle, ApiError> {
        self.control(id, Msg::Resume).await
    }

    /// Ends the run after the current slot; the terminal record carries a
    /// report over the slots that ran.
    pub async fn stop(&self, id: u64) -> Result<RunHandle, ApiError> {
        self.control(id, Msg::Stop).await
    }

    /// Queues a command for the next slot boundary. Paused runs queue it
    /// until they resume.
    pub async fn command(&self, id: u64, text: String) -> Result<CommandReceipt, ApiError> {
        let run = self.get_run(id).await?;
        if !run.status().is_active() {
            return Err(ApiError::invalid_state(id, run.status()));
        }
        run.ask(|tx| Msg::Command(text, tx)).await.ok_or_else(|| ApiError::invalid_state(id, run.status()))
    }

    pub async fn subscribe(&self, id: u64, replay: Option<usize>) -> Result<Subscription, ApiError> {
        Ok(self.get_run(id).await?.feed.subscribe(replay))
    }
}

/// Serves the API on `listener` until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<Service>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
