//! Slot-by-slot driver shared by batch runs and the control service.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::config::{effective_predictor, InterpreterChoice, ScenarioConfig};
use super::metrics::{SeedExtras, SlotRecord};
use crate::error::Result;
use crate::orchestrators::llm::{solver_exemplars, ModelClient};
use crate::orchestrators::policy::{AllLocalPolicy, GreedyPolicy, LlmPolicy, SolverPolicy};
use crate::orchestrators::{DecisionContext, Policy, PolicyKind};
use crate::pdt::{Pdt, PredictiveState};
use crate::semantics::{interpret_llm, interpret_rules_with, BetaWeights, InterpreterKind};
use crate::sim::{SimParams, World};

/// Acknowledgement for an operator command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandReceipt {
    pub command_text: String,
    /// Recorded slots completed when the command arrived.
    pub received_at_slot: u64,
    /// First recorded slot whose decision uses the new weights.
    pub effective_from_slot: u64,
    pub beta: BetaWeights,
    pub interpreter: InterpreterKind,
    pub unrecognized: bool,
    /// False when the policy ignores commands.
    pub applied: bool,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    params: SimParams,
    seed: u64,
    world: World,
    pdt: Pdt,
    policy: Box<dyn Policy>,
    interpreter: Option<Box<dyn ModelClient>>,
    beta: BetaWeights,
    goal_text: String,
    recorded: u64,
    pending: VecDeque<(String, BetaWeights)>,
    initial_backlog_bytes: f64,
}

fn build_policy(cfg: &ScenarioConfig, params: &SimParams) -> Result<Box<dyn Policy>> {
    Ok(match cfg.policy {
        PolicyKind::Sp => Box::new(SolverPolicy {
            cfg: cfg.solver.clone(),
            reactive: false,
        }),
        PolicyKind::Reactive => Box::new(SolverPolicy {
            cfg: cfg.solver.clone(),
            reactive: true,
        }),
        PolicyKind::Greedy => Box::new(GreedyPolicy {
            cfg: cfg.solver.greedy.clone(),
            solver: cfg.solver.clone(),
        }),
        PolicyKind::AllLocal => Box::new(AllLocalPolicy),
        PolicyKind::Llm => Box::new(LlmPolicy::new(
            cfg.llm.client.build(params, &cfg.llm.settings.solver)?,
            cfg.llm.settings.clone(),
            Vec::new(),
        )),
    })
}

impl Simulation {
    /// Builds the world and runs the unrecorded warm-up.
    pub fn new(cfg: ScenarioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.sim_params()?;
        let mut world = World::new(params.clone(), seed, cfg.population, cfg.volatility.clone())?;
        world.departure = cfg.departure;
        let predictor = effective_predictor(cfg.policy, cfg.predictor);
        let pdt = Pdt::new(predictor.config(), &world);
        let interpreter = match cfg.interpreter {
            InterpreterChoice::Rules => None,
            InterpreterChoice::Model => Some(cfg.llm.client.build(&params, &cfg.solver)?),
        };
        // the model-backed policy warms up on the solver and keeps the last
        // few warm-up states as exemplars
        let warm_policy: Box<dyn Policy> = match cfg.policy {
            PolicyKind::Llm => Box::new(SolverPolicy {
                cfg: cfg.solver.clone(),
                reactive: false,
            }),
            _ => build_policy(&cfg, &params)?,
        };
        let mut sim = Simulation {
            goal_text: cfg.initial_goal.clone(),
            beta: BetaWeights::balanced(),
            cfg,
            params,
            seed,
            world,
            pdt,
            policy: warm_policy,
            interpreter,
            recorded: 0,
            pending: VecDeque::new(),
            initial_backlog_bytes: 0.0,
        };
        if let Some((0, text)) = sim.cfg.goal_schedule.entries().first().cloned() {
            let (b, _) = sim.interpret(&text);
            sim.apply(text, b, 0);
        }
        let mut warm_states: VecDeque<(PredictiveState, String, BetaWeights)> = VecDeque::new();
        for _ in 0..sim.cfg.warmup_slots {
            let state = sim.pdt.assemble(&sim.world);
            let d = sim.policy.decide(&DecisionContext {
                state: &state,
                beta: &sim.beta,
                goal_text: &sim.goal_text,
                params: &sim.params,
            });
            let out = sim.world.step(&d)?;
            sim.pdt.observe(&sim.world, &out);
            if sim.cfg.llm.exemplars > 0 {
                if warm_states.len() == sim.cfg.llm.exemplars {
                    warm_states.pop_front();
                }
                warm_states.push_back((state, sim.goal_text.clone(), sim.beta.clone()));
            }
        }
        if sim.cfg.policy == PolicyKind::Llm {
            let states: Vec<_> = warm_states.into_iter().collect();
            let exemplars = solver_exemplars(&states, &sim.params, &sim.cfg.solver);
            sim.policy = Box::new(LlmPolicy::new(
                sim.cfg.llm.client.build(&sim.params, &sim.cfg.llm.settings.solver)?,
                sim.cfg.llm.settings.clone(),
                exemplars,
            ));
        }
        sim.initial_backlog_bytes = sim.world.queues.total_backlog_bytes();
        Ok(sim)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn beta(&self) -> &BetaWeights {
        &self.beta
    }

    pub fn goal_text(&self) -> &str {
        &self.goal_text
    }

    /// Recorded slots completed so far.
    pub fn recorded_slots(&self) -> u64 {
        self.recorded
    }

    pub fn is_finished(&self) -> bool {
        self.recorded >= self.cfg.total_slots
    }

    pub fn initial_backlog_bytes(&self) -> f64 {
        self.initial_backlog_bytes
    }

    fn interpret(&mut self, text: &str) -> (BetaWeights, InterpreterKind) {
        match self.interpreter.as_mut() {
            Some(client) => interpret_llm(text, client.as_mut()),
            None => (interpret_rules_with(text, &self.cfg.rules), InterpreterKind::Rules),
        }
    }

    fn apply(&mut self, text: String, mut beta: BetaWeights, slot: u64) {
        if self.cfg.semantic {
            beta.effective_from_slot = slot;
            self.beta = beta;
        }
        self.goal_text = text;
    }

    /// Queues a command; it takes effect at the next recorded slot.
    pub fn issue_command(&mut self, text: &str) -> CommandReceipt {
        let (beta, interpreter) = self.interpret(text);
        let receipt = CommandReceipt {
            command_text: text.to_string(),
            received_at_slot: self.recorded,
            effective_from_slot: self.recorded + 1,
            unrecognized: beta.unrecognized(),
            beta: beta.clone(),
            interpreter,
            applied: self.cfg.semantic,
        };
        self.pending.push_back((text.to_string(), beta));
        receipt
    }

    /// Runs the next recorded slot.
    pub fn step(&mut self) -> Result<SlotRecord> {
        let t = self.recorded + 1;
        let mut command = None;
        let scripted = self.cfg.goal_schedule.entries().iter().find(|(s, _)| *s == t).map(|(_, x)| x.clone());
        if let Some(text) = scripted {
            let (b, _) = self.interpret(&text);
            self.apply(text.clone(), b, t);
            command = Some(text);
        }
        while let Some((text, b)) = self.pending.pop_front() {
            self.apply(text.clone(), b, t);
            command = Some(text);
        }

        let state = self.pdt.assemble(&self.world);
        let d = self.policy.decide(&DecisionContext {
            state: &state,
            beta: &self.beta,
            goal_text: &self.goal_text,
            params: &self.params,
        });
        let out = self.world.step(&d)?;
        self.pdt.observe(&self.world, &out);
        self.recorded = t;

        let deadline_ms = |k: usize| self.params.deadline_s[k] * 1e3;
        let lat: Vec<f64> = out.completions.iter().map(|c| c.latency_s * 1e3).collect();
        let latency_sum_ms: f64 = lat.iter().sum();
        let violations = out
            .completions
            .iter()
            .filter(|c| !c.met_deadline || c.latency_s * 1e3 > deadline_ms(c.type_k))
            .count();
        Ok(SlotRecord {
            seed: self.seed,
            slot: t,
            world_slot: out.slot,
            policy: self.cfg.label(),
            vehicles: state.num_vehicles(),
            completed: lat.len(),
            latency_sum_ms,
            mean_latency_ms: if lat.is_empty() { 0.0 } else { latency_sum_ms / lat.len() as f64 },
            max_latency_ms: lat.iter().copied().fold(0.0, f64::max),
            violations,
            energy_j: out.slot_energy_j,
            transmit_j: out.energy.transmit_j,
            local_j: out.energy.local_j,
            server_j: out.energy.server_j,
            arrived_bytes: out.arrived_bytes.clone(),
            served_bytes: out.served_bytes.clone(),
            dropped_bytes: out.dropped_bytes.clone(),
            backlog_bytes: out.backlog_bytes.clone(),
            offloaded_pairs: d.offload.iter().flatten().filter(|&&w| w > 0.0).count(),
            alloc_sum: d.alloc_sum(),
            beta_e: self.beta.beta_e,
            beta_q: self.beta.beta_q,
            command_class: self.beta.class,
            fallback: d.flags.fallback,
            stale: d.flags.stale,
            command,
        })
    }

    pub fn extras(&self) -> SeedExtras {
        let c = self.policy.counters().unwrap_or_default();
        SeedExtras {
            llm_calls: c.calls,
            llm_fallbacks: c.fallbacks,
            llm_stale_slots: c.stale_slots,
            accuracy: Some(self.pdt.accuracy()),
        }
    }
}
