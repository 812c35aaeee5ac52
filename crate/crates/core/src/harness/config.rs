//! Scenario configuration and presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orchestrators::llm::{DisabledClient, LlmConfig, MockClient, ModelClient, SolverEchoClient};
use crate::orchestrators::{PolicyKind, SolverConfig};
use crate::pdt::PredictorKind;
use crate::semantics::{GoalSchedule, RuleTable};
use crate::sim::{DeparturePolicy, Population, SimParams, SimParamsFile, Volatility};

pub const ENERGY_SAVE_COMMAND: &str = "Switch to maximum energy saving mode immediately. Tolerate higher latency.";
pub const DEFAULT_GOAL: &str = "Balanced operation: keep latency and energy both moderate.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Scalability,
    Dynamic,
    GoalAdaptation,
    Custom,
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scalability" => ScenarioId::Scalability,
            "dynamic" => ScenarioId::Dynamic,
            "goal-adaptation" => ScenarioId::GoalAdaptation,
            "custom" => ScenarioId::Custom,
            other => return Err(Error::Config(format!("unknown scenario `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpreterChoice {
    Rules,
    Model,
}

/// Where model calls go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClientSpec {
    /// Answers with the solver's decision; no network.
    SolverEcho {
        #[serde(default)]
        latency_s: f64,
    },
    Mock {
        #[serde(default)]
        fixture: Option<PathBuf>,
        #[serde(default)]
        responses: Vec<String>,
        #[serde(default)]
        latency_s: f64,
    },
    Disabled,
    #[cfg(feature = "http-client")]
    Http(crate::orchestrators::llm::HttpClientConfig),
}

impl Default for ClientSpec {
    fn default() -> Self {
        ClientSpec::SolverEcho { latency_s: 0.0 }
    }
}

impl ClientSpec {
    pub fn build(&self, params: &SimParams, solver: &SolverConfig) -> Result<Box<dyn ModelClient>> {
        Ok(match self {
            ClientSpec::SolverEcho { latency_s } => {
                let mut c = SolverEchoClient::new(params.clone(), solver.clone());
                c.simulated_latency_s = *latency_s;
                Box::new(c)
            }
            ClientSpec::Mock {
                fixture,
                responses,
                latency_s,
            } => {
                let mut c = match fixture {
                    Some(p) => MockClient::from_fixture(p)?,
                    None => MockClient::new(responses.clone()),
                };
                if *latency_s > 0.0 {
                    c.simulated_latency_s = *latency_s;
                }
                Box::new(c)
            }
            ClientSpec::Disabled => Box::new(DisabledClient),
            #[cfg(feature = "http-client")]
            ClientSpec::Http(cfg) => Box::new(crate::orchestrators::llm::HttpClient::new(cfg.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub client: ClientSpec,
    pub settings: LlmConfig,
    /// Solver-made examples shown to the model, taken from the warm-up.
    pub exemplars: usize,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            client: ClientSpec::default(),
            settings: LlmConfig::default(),
            exemplars: 2,
        }
    }
}

/// A named range of recorded slots, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub name: String,
    pub from: u64,
    pub to: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    /// Free-form label used in tables (defaults to the policy name).
    pub label: Option<String>,
    pub params: SimParamsFile,
    pub policy: PolicyKind,
    pub predictor: PredictorKind,
    /// Whether commands change this policy's β (baselines ignore them).
    pub semantic: bool,
    pub population: Population,
    /// Recorded slots, numbered from 1.
    pub total_slots: u64,
    /// Unrecorded slots run first so predictors have history.
    pub warmup_slots: u64,
    pub seeds: Vec<u64>,
    /// Commands keyed by recorded slot.
    pub goal_schedule: GoalSchedule,
    pub initial_goal: String,
    pub volatility: Option<Volatility>,
    pub departure: DeparturePolicy,
    pub solver: SolverConfig,
    pub llm: LlmSection,
    pub interpreter: InterpreterChoice,
    pub rules: RuleTable,
    pub phases: Vec<PhaseSpec>,
    /// Tumbling window for the peak violation rate.
    pub violation_window: u64,
    /// Parallel seed runs; all cores when unset.
    pub workers: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioId::Custom,
            label: None,
            params: SimParamsFile::default(),
            policy: PolicyKind::Sp,
            predictor: PredictorKind::Kalman,
            semantic: true,
            population: Population::Fixed(10),
            total_slots: 200,
            warmup_slots: 20,
            seeds: (0..10).collect(),
            goal_schedule: GoalSchedule::default(),
            initial_goal: DEFAULT_GOAL.to_string(),
            volatility: None,
            departure: DeparturePolicy::CompleteAtServer,
            solver: SolverConfig::default(),
            llm: LlmSection::default(),
            interpreter: InterpreterChoice::Rules,
            rules: RuleTable::default(),
            phases: Vec::new(),
            violation_window: 10,
            workers: None,
        }
    }
}

/// Predictor a policy actually runs with: the reactive and greedy
/// baselines only ever see current values.
pub fn effective_predictor(policy: PolicyKind, configured: PredictorKind) -> PredictorKind {
    match policy {
        PolicyKind::Reactive | PolicyKind::Greedy | PolicyKind::AllLocal => PredictorKind::Reactive,
        PolicyKind::Sp | PolicyKind::Llm => configured,
    }
}

impl ScenarioConfig {
    /// Load load scaling: table column N, constant population.
    pub fn scalability(n: usize, policy: PolicyKind) -> Self {
        ScenarioConfig {
            scenario: ScenarioId::Scalability,
            policy,
            semantic: policy_is_semantic(policy),
            population: Population::Fixed(n),
            total_slots: 200,
            ..ScenarioConfig::default()
        }
    }

    /// Speed re-draws, shadowing and noise bursts.
    pub fn dynamic(policy: PolicyKind) -> Self {
        ScenarioConfig {
            scenario: ScenarioId::Dynamic,
            policy,
            semantic: policy_is_semantic(policy),
            population: Population::Fixed(20),
            total_slots: 200,
            volatility: Some(Volatility::default()),
            ..ScenarioConfig::default()
        }
    }

    /// Balanced for 50 slots, then the energy-save command at slot 51.
    pub fn goal_adaptation(policy: PolicyKind) -> Self {
        ScenarioConfig {
            scenario: ScenarioId::GoalAdaptation,
            policy,
            semantic: policy_is_semantic(policy),
            population: Population::Fixed(20),
            total_slots: 100,
            goal_schedule: GoalSchedule::new(vec![(51, ENERGY_SAVE_COMMAND.to_string())]).expect("ordered"),
            phases: vec![
                PhaseSpec {
                    name: "Phase 1".into(),
                    from: 1,
                    to: 50,
                },
                PhaseSpec {
                    name: "Phase 2".into(),
                    from: 51,
                    to: 100,
                },
            ],
            ..ScenarioConfig::default()
        }
    }

    pub fn preset(id: ScenarioId, policy: PolicyKind, n: Option<usize>) -> Self {
        let mut c = match id {
            ScenarioId::Scalability => ScenarioConfig::scalability(n.unwrap_or(10), policy),
            ScenarioId::Dynamic => ScenarioConfig::dynamic(policy),
            ScenarioId::GoalAdaptation => ScenarioConfig::goal_adaptation(policy),
            ScenarioId::Custom => ScenarioConfig {
                policy,
                ..ScenarioConfig::default()
            },
        };
        if let Some(n) = n {
            c.population = Population::Fixed(n);
        }
        c
    }

    pub fn sim_params(&self) -> Result<SimParams> {
        self.params.to_params()
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.policy.as_str().to_string())
    }

    pub fn num_vehicles_hint(&self) -> usize {
        match self.population {
            Population::Fixed(n) => n,
            Population::Poisson { initial } => initial,
        }
    }

    /// Checks everything before any simulation starts.
    pub fn validate(&self) -> Result<()> {
        let p = self.sim_params()?;
        if self.total_slots == 0 {
            return Err(Error::Config("total_slots must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.violation_window == 0 {
            return Err(Error::Config("violation_window must be at least 1".into()));
        }
        self.goal_schedule.validate()?;
        for ph in &self.phases {
            if ph.from == 0 || ph.from > ph.to || ph.to > self.total_slots {
                return Err(Error::Config(format!(
                    "phase `{}` range {}..={} outside 1..={}",
                    ph.name, ph.from, ph.to, self.total_slots
                )));
            }
        }
        let o = &self.solver.objective;
        if !(o.backlog_unit_bytes > 0.0 && o.energy_unit_j > 0.0) {
            return Err(Error::Config("objective units must be positive".into()));
        }
        if self.solver.fine_step <= 0.0 || self.solver.coarse_step <= 0.0 {
            return Err(Error::Config("solver steps must be positive".into()));
        }
        if self.solver.greedy.min_share <= 0.0 {
            return Err(Error::Config("greedy.min_share must be positive".into()));
        }
        if p.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Whether a policy reads the operator goal by default.
pub fn policy_is_semantic(policy: PolicyKind) -> bool {
    matches!(policy, PolicyKind::Sp | PolicyKind::Llm)
}
