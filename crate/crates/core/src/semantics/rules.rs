//! Keyword interpreter for operator commands.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{BetaWeights, CommandClass};

/// Weight table for the rule interpreter. Overridable from run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleTable {
    pub energy_save: (f64, f64),
    pub latency_priority: (f64, f64),
    pub balanced: (f64, f64),
    pub vehicle_multiplier: f64,
}

impl Default for RuleTable {
    fn default() -> Self {
        RuleTable {
            energy_save: (8.0, 0.25),
            latency_priority: (0.25, 8.0),
            balanced: (1.0, 1.0),
            vehicle_multiplier: 4.0,
        }
    }
}

const ENERGY_STEMS: [&str; 3] = ["energy", "saving", "power"];
const LATENCY_STEMS: [&str; 4] = ["latency", "priorit", "fast", "emergency"];

fn concession_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // "tolerate higher latency", "accept more energy use",
        // "even at a higher energy cost", "at the expense of latency"
        Regex::new(
            r"(?x)
            \b(?:tolerat\w*|accept\w*|allow\w*)\s+(?:a\s+|some\s+)?(?:higher|more|increased|greater|extra)\s+[\w-]+
            | \beven\s+at\s+(?:a\s+|the\s+)?(?:higher|greater|increased|extra)\s+[\w-]+(?:\s+(?:cost|use|usage|consumption))?
            | \bat\s+the\s+(?:expense|cost)\s+of\s+(?:higher\s+|more\s+)?[\w-]+
            ",
        )
        .expect("static pattern")
    })
}

fn vehicle_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bvehicles?\s*#?\s*(\d+)").expect("static pattern"))
}

/// Removes clauses that name a cost the operator is willing to pay, so
/// "save energy, tolerate higher latency" is not read as a latency request.
pub fn strip_concessions(text: &str) -> String {
    concession_re().replace_all(text, " ").into_owned()
}

/// Vehicle ids named as `vehicle <n>` (in order of appearance, deduplicated).
pub fn vehicle_ids(text: &str) -> Vec<u64> {
    let mut out = Vec::new();
    for cap in vehicle_re().captures_iter(&text.to_lowercase()) {
        if let Ok(id) = cap[1].parse::<u64>() {
            if !out.contains(&id) {
                out.push(id);
            }
        }
    }
    out
}

fn has_any(text: &str, stems: &[&str]) -> bool {
    stems.iter().any(|s| text.contains(s))
}

/// Classifies a command by its keywords. Latency wins when both classes
/// remain after the concessions are stripped. Named vehicles only add the
/// per-vehicle multiplier on top of whatever class the keywords select; a
/// command that names vehicles and has no keywords is `VehiclePriority`.
pub fn classify(text: &str) -> (CommandClass, Vec<u64>) {
    let lower = text.to_lowercase();
    let core = strip_concessions(&lower);
    let ids = vehicle_ids(&lower);
    let class = if has_any(&core, &LATENCY_STEMS) {
        CommandClass::LatencyPriority
    } else if has_any(&core, &ENERGY_STEMS) {
        CommandClass::EnergySave
    } else if !ids.is_empty() {
        CommandClass::VehiclePriority
    } else {
        CommandClass::Unrecognized
    };
    (class, ids)
}

pub fn interpret_rules_with(text: &str, table: &RuleTable) -> BetaWeights {
    let (class, ids) = classify(text);
    let (beta_e, beta_q) = match class {
        CommandClass::EnergySave => table.energy_save,
        CommandClass::LatencyPriority => table.latency_priority,
        CommandClass::Balanced | CommandClass::VehiclePriority | CommandClass::Unrecognized => table.balanced,
    };
    let per_vehicle_priority: BTreeMap<u64, f64> = ids.into_iter().map(|id| (id, table.vehicle_multiplier)).collect();
    BetaWeights {
        beta_e,
        beta_q,
        per_vehicle_priority,
        effective_from_slot: 0,
        source_command_text: text.to_string(),
        class,
    }
}

/// Total, deterministic mapping from command text to weights.
pub fn interpret_rules(text: &str) -> BetaWeights {
    interpret_rules_with(text, &RuleTable::default())
}
