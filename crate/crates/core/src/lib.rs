//! Vehicular edge computing simulator with a predictive digital twin and a
//! drift-plus-penalty orchestrator steerable by operator commands.

pub mod error;
pub mod harness;
pub mod orchestrators;
pub mod pdt;
pub mod rng;
pub mod semantics;
pub mod sim;

pub use error::{Error, Result};
pub use orchestrators::{Decision, PolicyKind};
pub use pdt::{PredictiveState, PredictorConfig, PredictorKind};
pub use semantics::{BetaWeights, GoalSchedule};
pub use sim::{SimParams, World};
