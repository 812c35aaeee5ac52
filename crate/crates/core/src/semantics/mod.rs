//! Semantic control: operator commands to optimisation weights β(t).

pub mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use rules::{classify, interpret_rules, interpret_rules_with, RuleTable};

use crate::error::{Error, Result};
use crate::orchestrators::llm::{ChatMessage, ModelClient};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandClass {
    #[default]
    Balanced,
    EnergySave,
    LatencyPriority,
    /// Only per-vehicle multipliers change.
    VehiclePriority,
    Unrecognized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaWeights {
    #[serde(rename = "beta_E")]
    pub beta_e: f64,
    #[serde(rename = "beta_Q")]
    pub beta_q: f64,
    #[serde(default)]
    pub per_vehicle_priority: BTreeMap<u64, f64>,
    #[serde(default)]
    pub effective_from_slot: u64,
    #[serde(default)]
    pub source_command_text: String,
    #[serde(default)]
    pub class: CommandClass,
}

impl Default for BetaWeights {
    fn default() -> Self {
        BetaWeights::balanced()
    }
}

impl BetaWeights {
    pub fn balanced() -> Self {
        BetaWeights {
            beta_e: 1.0,
            beta_q: 1.0,
            per_vehicle_priority: BTreeMap::new(),
            effective_from_slot: 0,
            source_command_text: String::new(),
            class: CommandClass::Balanced,
        }
    }

    pub fn new(beta_e: f64, beta_q: f64) -> Self {
        BetaWeights {
            beta_e,
            beta_q,
            ..BetaWeights::balanced()
        }
    }

    pub fn priority_of(&self, vehicle_id: u64) -> f64 {
        self.per_vehicle_priority.get(&vehicle_id).copied().unwrap_or(1.0)
    }

    pub fn unrecognized(&self) -> bool {
        self.class == CommandClass::Unrecognized
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.beta_e) || !ok(self.beta_q) || self.beta_e + self.beta_q <= 0.0 {
            return Err(Error::InvalidParam {
                name: "beta",
                reason: format!("need finite β_E, β_Q ≥ 0 with positive sum, got {} / {}", self.beta_e, self.beta_q),
            });
        }
        if let Some((id, m)) = self.per_vehicle_priority.iter().find(|(_, m)| !ok(**m)) {
            return Err(Error::InvalidParam {
                name: "per_vehicle_priority",
                reason: format!("vehicle {id}: multiplier {m}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpreterKind {
    Rules,
    Model,
    Fallback,
}

/// Ordered `(slot, command)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalSchedule {
    entries: Vec<(u64, String)>,
}

impl GoalSchedule {
    pub fn new(entries: Vec<(u64, String)>) -> Result<Self> {
        let s = GoalSchedule { entries };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config("goal schedule slots must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(u64, String)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The latest command with slot ≤ `slot`.
    pub fn active_at(&self, slot: u64) -> Option<&(u64, String)> {
        self.entries.iter().rev().find(|(s, _)| *s <= slot)
    }
}

/// Weights in force at `slot`: the latest scheduled command at or before
/// it, otherwise `current`.
pub fn apply_schedule(schedule: &GoalSchedule, slot: u64, current: &BetaWeights) -> BetaWeights {
    apply_schedule_with(schedule, slot, current, &RuleTable::default())
}

pub fn apply_schedule_with(schedule: &GoalSchedule, slot: u64, current: &BetaWeights, table: &RuleTable) -> BetaWeights {
    match schedule.active_at(slot) {
        Some((s, text)) => {
            let mut b = interpret_rules_with(text, table);
            b.effective_from_slot = *s;
            b
        }
        None => current.clone(),
    }
}

const WEIGHT_PROMPT: &str = "You translate network operator commands into optimisation weights. \
Reply with one JSON object {\"beta_E\": <number>, \"beta_Q\": <number>, \"priorities\": {\"<vehicle id>\": <multiplier>}} and nothing else. \
beta_E weights energy, beta_Q weights latency/QoS; balanced operation is 1 and 1.";

#[derive(Deserialize)]
struct WeightReply {
    #[serde(rename = "beta_E")]
    beta_e: f64,
    #[serde(rename = "beta_Q")]
    beta_q: f64,
    #[serde(default)]
    priorities: BTreeMap<String, f64>,
}

fn parse_weight_reply(text: &str, command: &str) -> Result<BetaWeights> {
    let json = crate::orchestrators::parse::extract_json_object(text)
        .ok_or_else(|| Error::Config("no JSON object in model reply".into()))?;
    let reply: WeightReply = serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
    let mut per_vehicle_priority = BTreeMap::new();
    for (k, v) in reply.priorities {
        let id = k
            .trim()
            .trim_start_matches("vehicle")
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("bad vehicle key `{k}`")))?;
        per_vehicle_priority.insert(id, v);
    }
    let class = if reply.beta_e > reply.beta_q {
        CommandClass::EnergySave
    } else if reply.beta_q > reply.beta_e {
        CommandClass::LatencyPriority
    } else if per_vehicle_priority.is_empty() {
        CommandClass::Balanced
    } else {
        CommandClass::VehiclePriority
    };
    let b = BetaWeights {
        beta_e: reply.beta_e,
        beta_q: reply.beta_q,
        per_vehicle_priority,
        effective_from_slot: 0,
        source_command_text: command.to_string(),
        class,
    };
    b.validate()?;
    Ok(b)
}

/// Model-backed interpretation. Any failure (transport, format, range)
/// falls back to [`interpret_rules`].
pub fn interpret_llm(text: &str, client: &mut dyn ModelClient) -> (BetaWeights, InterpreterKind) {
    let messages = [ChatMessage::system(WEIGHT_PROMPT), ChatMessage::user(text)];
    match client.complete(&messages).and_then(|reply| parse_weight_reply(&reply, text)) {
        Ok(b) => (b, InterpreterKind::Model),
        Err(e) => {
            log::warn!("weight interpreter fell back to rules: {e}");
            (interpret_rules(text), InterpreterKind::Fallback)
        }
    }
}
