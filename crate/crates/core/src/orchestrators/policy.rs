//! Common policy interface used by the harness.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::greedy::{greedy_decide, GreedyConfig};
use super::llm::{llm_decide_detailed, LlmConfig, ModelClient};
use super::prompt::Exemplar;
use super::solver::{reactive_decide, solve_per_slot, SolverConfig};
use super::{Decision, PolicyTag};
use crate::error::{Error, Result};
use crate::pdt::PredictiveState;
use crate::semantics::BetaWeights;
use crate::sim::SimParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Sp,
    Reactive,
    Greedy,
    Llm,
    AllLocal,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Sp => "sp",
            PolicyKind::Reactive => "reactive",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Llm => "llm",
            PolicyKind::AllLocal => "all-local",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sp" => PolicyKind::Sp,
            "reactive" => PolicyKind::Reactive,
            "greedy" => PolicyKind::Greedy,
            "llm" => PolicyKind::Llm,
            "all-local" | "local" => PolicyKind::AllLocal,
            other => return Err(Error::Config(format!("unknown policy `{other}`"))),
        })
    }
}

/// Everything a policy may look at for one slot.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub state: &'a PredictiveState,
    pub beta: &'a BetaWeights,
    pub goal_text: &'a str,
    pub params: &'a SimParams,
}

pub trait Policy: Send {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Decision;
    fn tag(&self) -> PolicyTag;
    /// Model-call counters, for policies that call a model.
    fn counters(&self) -> Option<LlmCounters> {
        None
    }
}

pub struct SolverPolicy {
    pub cfg: SolverConfig,
    pub reactive: bool,
}

impl Policy for SolverPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Decision {
        if self.reactive {
            reactive_decide(ctx.state, ctx.beta, ctx.params, &self.cfg)
        } else {
            solve_per_slot(ctx.state, ctx.beta, ctx.params, &self.cfg)
        }
    }

    fn tag(&self) -> PolicyTag {
        if self.reactive {
            PolicyTag::Reactive
        } else {
            PolicyTag::Sp
        }
    }
}

pub struct GreedyPolicy {
    pub cfg: GreedyConfig,
    pub solver: SolverConfig,
}

impl Policy for GreedyPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Decision {
        greedy_decide(ctx.state, ctx.params, &self.cfg, &self.solver.objective)
    }

    fn tag(&self) -> PolicyTag {
        PolicyTag::Greedy
    }
}

pub struct AllLocalPolicy;

impl Policy for AllLocalPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Decision {
        Decision::all_local(ctx.state.slot_index, ctx.state.vehicle_ids.clone(), ctx.state.num_types())
    }

    fn tag(&self) -> PolicyTag {
        PolicyTag::AllLocal
    }
}

/// Carries `prev` over to the current vehicle set: known vehicles keep
/// their rows, new ones compute locally.
pub fn carry_over(prev: &Decision, state: &PredictiveState) -> Decision {
    let k = state.num_types();
    let mut d = Decision::all_local(state.slot_index, state.vehicle_ids.clone(), k);
    for (n, id) in state.vehicle_ids.iter().enumerate() {
        if let Some(r) = prev.row_of(*id) {
            d.offload[n] = prev.offload[r].clone();
            d.alloc[n] = prev.alloc[r].clone();
        }
    }
    d.policy = prev.policy;
    d.flags = prev.flags;
    d
}

/// Counters kept by the model-backed policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCounters {
    pub calls: u64,
    pub fallbacks: u64,
    pub stale_slots: u64,
}

/// One model call per slot. A call slower than the slot length delivers its
/// answer `ceil(latency / Δ)` slots later; until then the previous decision
/// is reused and flagged stale.
pub struct LlmPolicy {
    pub client: Box<dyn ModelClient>,
    pub cfg: LlmConfig,
    pub exemplars: Vec<Exemplar>,
    pending: Option<(u64, Decision)>,
    last: Option<Decision>,
    pub counters: LlmCounters,
}

impl LlmPolicy {
    pub fn new(client: Box<dyn ModelClient>, cfg: LlmConfig, exemplars: Vec<Exemplar>) -> Self {
        LlmPolicy {
            client,
            cfg,
            exemplars,
            pending: None,
            last: None,
            counters: LlmCounters::default(),
        }
    }

    fn stale(&mut self, ctx: &DecisionContext<'_>) -> Decision {
        self.counters.stale_slots += 1;
        let mut d = match &self.last {
            Some(prev) => carry_over(prev, ctx.state),
            None => Decision::all_local(ctx.state.slot_index, ctx.state.vehicle_ids.clone(), ctx.state.num_types()),
        };
        d.policy = PolicyTag::Llm;
        d.flags.stale = true;
        d
    }
}

impl Policy for LlmPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Decision {
        let slot = ctx.state.slot_index;
        if let Some((ready, d)) = self.pending.take() {
            if slot < ready {
                self.pending = Some((ready, d));
                return self.stale(ctx);
            }
            let mut d = carry_over(&d, ctx.state);
            d.slot = slot;
            self.last = Some(d.clone());
            return d;
        }
        let out = llm_decide_detailed(ctx.state, ctx.goal_text, ctx.beta, self.client.as_mut(), ctx.params, &self.exemplars, &self.cfg);
        self.counters.calls += 1;
        if out.fallback.is_some() {
            self.counters.fallbacks += 1;
        }
        let dt = ctx.params.slot_duration_s;
        if out.fallback.is_none() && out.latency_s > dt {
            let delay = (out.latency_s / dt).ceil() as u64;
            self.pending = Some((slot + delay, out.decision));
            return self.stale(ctx);
        }
        self.last = Some(out.decision.clone());
        out.decision
    }

    fn tag(&self) -> PolicyTag {
        PolicyTag::Llm
    }

    fn counters(&self) -> Option<LlmCounters> {
        Some(self.counters)
    }
}
