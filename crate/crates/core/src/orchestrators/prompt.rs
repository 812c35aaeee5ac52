//! Prompt construction for the model-backed orchestrator.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::Decision;
use crate::error::{Error, Result};
use crate::pdt::PredictiveState;

pub const GOAL_OPEN: &str = "[STRATEGIC GOAL]";
pub const GOAL_CLOSE: &str = "[/STRATEGIC GOAL]";
pub const EXEMPLAR_TAG: &str = "(State, Goal) -> (Action)";

const ROLE: &str = "You control task offloading for vehicles on a 2 km highway segment served by one roadside edge server. \
Each slot you choose, per vehicle and task type, the share of queued bytes sent to the server (w) \
and the share of server CPU granted to that work (a). The a values over all vehicles and types must sum to at most 1, \
and a may only be positive where w is positive.";

const TASK: &str = "Return the decision for the current slot. Rows follow vehicle_ids, columns follow task types. \
The output must be a single JSON object of the form {\"w\": [[...]], \"a\": [[...]]} with every entry in [0, 1].";

/// Field order of the serialized state; fixed so prompts are byte-stable.
const STATE_FIELDS: [&str; 13] = [
    "slot_index",
    "horizon",
    "mode",
    "vehicle_ids",
    "current_positions_m",
    "current_rates_bps",
    "predicted_positions_m",
    "predicted_rates_bps",
    "predicted_arrivals_bytes",
    "current_backlogs_bytes",
    "vehicle_backlogs_bytes",
    "bandwidth_share_hz",
    "low_confidence",
];

/// A solved example shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub state: PredictiveState,
    pub goal: String,
    pub action: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub role: String,
    pub goal: String,
    pub state: String,
    pub exemplars: Vec<String>,
    pub task: String,
}

/// `label: <json>` lines, one per state field, plus the locations as 2-D
/// points (`[position, 0]`) which [`parse_state`] ignores.
pub fn serialize_state(state: &PredictiveState) -> String {
    let v = serde_json::to_value(state).expect("state serializes");
    let mut out = String::new();
    for f in STATE_FIELDS {
        out.push_str(f);
        out.push_str(": ");
        out.push_str(&v[f].to_string());
        out.push('\n');
    }
    let xy: Vec<[f64; 2]> = state.current_positions_m.iter().map(|&p| [p, 0.0]).collect();
    out.push_str("vehicle_locations_xy: ");
    out.push_str(&serde_json::to_string(&xy).expect("numbers serialize"));
    out.push('\n');
    out
}

pub fn parse_state(text: &str) -> Result<PredictiveState> {
    let mut map = Map::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, val) = line
            .split_once(": ")
            .ok_or_else(|| Error::Config(format!("bad state line `{line}`")))?;
        if STATE_FIELDS.contains(&key) {
            let v: Value = serde_json::from_str(val).map_err(|e| Error::Config(format!("{key}: {e}")))?;
            map.insert(key.to_string(), v);
        }
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))
}

fn action_json(d: &Decision) -> String {
    serde_json::json!({ "w": d.offload, "a": d.alloc }).to_string()
}

fn render_exemplar(i: usize, e: &Exemplar) -> String {
    format!(
        "Example {i}: {EXEMPLAR_TAG}\nState:\n{}Goal: {}\nAction: {}\n",
        serialize_state(&e.state),
        e.goal,
        action_json(&e.action)
    )
}

/// Builds the five prompt sections. At most `max_exemplars` examples are
/// kept (the first ones).
pub fn build_prompt(state: &PredictiveState, goal_text: &str, exemplars: &[Exemplar], max_exemplars: usize) -> PromptBundle {
    PromptBundle {
        role: ROLE.to_string(),
        goal: goal_text.to_string(),
        state: serialize_state(state),
        exemplars: exemplars
            .iter()
            .take(max_exemplars)
            .enumerate()
            .map(|(i, e)| render_exemplar(i + 1, e))
            .collect(),
        task: TASK.to_string(),
    }
}

impl PromptBundle {
    pub fn system_text(&self) -> String {
        format!("## Role\n{}\n", self.role)
    }

    pub fn user_text(&self) -> String {
        let mut s = String::new();
        s.push_str("## Strategic Goal\n");
        s.push_str(GOAL_OPEN);
        s.push('\n');
        s.push_str(&self.goal);
        s.push('\n');
        s.push_str(GOAL_CLOSE);
        s.push_str("\n\n## Predictive State\n");
        s.push_str(&self.state);
        s.push_str("\n## Exemplars\n");
        if self.exemplars.is_empty() {
            s.push_str("(none)\n");
        }
        for e in &self.exemplars {
            s.push_str(e);
            s.push('\n');
        }
        s.push_str("## Task\n");
        s.push_str(&self.task);
        s.push('\n');
        s
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.system_text(), self.user_text())
    }

    pub fn exemplar_count(&self) -> usize {
        self.exemplars.len()
    }
}
