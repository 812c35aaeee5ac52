//! Decision layer: the drift-plus-penalty solver, the greedy baseline, and
//! the model-backed orchestrator with its prompt and parser.

pub mod decision;
pub mod greedy;
pub mod llm;
pub mod objective;
pub mod parse;
pub mod policy;
pub mod prompt;
pub mod solver;

pub use decision::{Decision, DecisionFlags, PolicyTag, BUDGET_EPS};
pub use greedy::{greedy_decide, GreedyConfig};
pub use llm::{llm_decide, ChatMessage, DisabledClient, LlmConfig, MockClient, ModelClient, SolverEchoClient};
pub use objective::{evaluate_objective, server_budget, ObjectiveBreakdown, ObjectiveConfig, Problem};
pub use parse::{extract_json_object, parse_decision, ParseError};
pub use policy::{DecisionContext, Policy, PolicyKind};
pub use prompt::{build_prompt, Exemplar, PromptBundle};
pub use solver::{reactive_decide, solve_per_slot, SolverConfig};
