use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the server CPU budget `Σ a ≤ 1`.
pub const BUDGET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyTag {
    Sp,
    Reactive,
    Greedy,
    Llm,
    AllLocal,
    Manual,
}

impl PolicyTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyTag::Sp => "sp",
            PolicyTag::Reactive => "reactive",
            PolicyTag::Greedy => "greedy",
            PolicyTag::Llm => "llm",
            PolicyTag::AllLocal => "all-local",
            PolicyTag::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionFlags {
    /// Model output unusable; the solver's decision was substituted.
    pub fallback: bool,
    /// Reused from an earlier slot because the model call overran.
    pub stale: bool,
    /// Some entries were clamped into [0, 1].
    pub clamped: bool,
    /// Allocations were rescaled to respect the CPU budget.
    pub rescaled: bool,
}

/// Offloading ratios `w` and server CPU shares `a`, one row per vehicle
/// (ordered as `vehicle_ids`) and one column per task type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub slot: u64,
    pub vehicle_ids: Vec<u64>,
    pub offload: Vec<Vec<f64>>,
    pub alloc: Vec<Vec<f64>>,
    pub policy: PolicyTag,
    #[serde(default)]
    pub flags: DecisionFlags,
}

impl Decision {
    /// Everything computed on board.
    pub fn all_local(slot: u64, vehicle_ids: Vec<u64>, num_types: usize) -> Decision {
        let n = vehicle_ids.len();
        Decision {
            slot,
            vehicle_ids,
            offload: vec![vec![0.0; num_types]; n],
            alloc: vec![vec![0.0; num_types]; n],
            policy: PolicyTag::AllLocal,
            flags: DecisionFlags::default(),
        }
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicle_ids.len()
    }

    pub fn num_types(&self) -> usize {
        self.offload.first().map_or(0, |r| r.len())
    }

    pub fn row_of(&self, vehicle_id: u64) -> Option<usize> {
        self.vehicle_ids.iter().position(|&v| v == vehicle_id)
    }

    pub fn alloc_sum(&self) -> f64 {
        self.alloc.iter().flatten().sum()
    }

    pub fn offload_for(&self, vehicle_id: u64, k: usize) -> f64 {
        self.row_of(vehicle_id).map_or(0.0, |r| self.offload[r][k])
    }

    pub fn alloc_for(&self, vehicle_id: u64, k: usize) -> f64 {
        self.row_of(vehicle_id).map_or(0.0, |r| self.alloc[r][k])
    }

    /// Checks the shape and the three invariants: entries in [0, 1], total
    /// allocation within budget, allocation only where work is offloaded.
    pub fn validate(&self, num_types: usize) -> Result<()> {
        let n = self.vehicle_ids.len();
        if self.offload.len() != n || self.alloc.len() != n {
            return Err(Error::InvalidDecision(format!(
                "expected {n} rows, got w={} a={}",
                self.offload.len(),
                self.alloc.len()
            )));
        }
        for (r, (w_row, a_row)) in self.offload.iter().zip(&self.alloc).enumerate() {
            if w_row.len() != num_types || a_row.len() != num_types {
                return Err(Error::InvalidDecision(format!(
                    "row {r}: expected {num_types} columns"
                )));
            }
            for (k, (&w, &a)) in w_row.iter().zip(a_row).enumerate() {
                if !(0.0..=1.0).contains(&w) || !(0.0..=1.0).contains(&a) {
                    return Err(Error::InvalidDecision(format!(
                        "entry ({r},{k}) out of [0,1]: w={w} a={a}"
                    )));
                }
                if a > 0.0 && w <= 0.0 {
                    return Err(Error::InvalidDecision(format!(
                        "entry ({r},{k}) allocates CPU to work that is not offloaded"
                    )));
                }
            }
        }
        let mut ids = self.vehicle_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != n {
            return Err(Error::InvalidDecision("duplicate vehicle ids".into()));
        }
        let sum = self.alloc_sum();
        if sum > 1.0 + BUDGET_EPS {
            return Err(Error::InvalidDecision(format!(
                "allocation sum {sum} exceeds server budget"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(w: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> Decision {
        Decision {
            slot: 0,
            vehicle_ids: (0..w.len() as u64).collect(),
            offload: w,
            alloc: a,
            policy: PolicyTag::Manual,
            flags: DecisionFlags::default(),
        }
    }

    #[test]
    fn accepts_valid() {
        d(vec![vec![0.5, 1.0]], vec![vec![0.3, 0.7]]).validate(2).unwrap();
        Decision::all_local(0, vec![1, 2], 2).validate(2).unwrap();
    }

    #[test]
    fn rejects_over_budget() {
        assert!(d(vec![vec![1.0, 1.0]], vec![vec![0.6, 0.6]]).validate(2).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(d(vec![vec![1.2]], vec![vec![0.1]]).validate(1).is_err());
        assert!(d(vec![vec![0.5]], vec![vec![-0.1]]).validate(1).is_err());
    }

    #[test]
    fn rejects_allocation_without_offload() {
        assert!(d(vec![vec![0.0]], vec![vec![0.2]]).validate(1).is_err());
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(d(vec![vec![0.5]], vec![vec![0.1]]).validate(2).is_err());
    }
}
