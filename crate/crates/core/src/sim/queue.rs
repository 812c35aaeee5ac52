use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::tasks::Task;

/// A queued task with the bytes still to be processed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingTask {
    pub task: Task,
    pub remaining_bytes: f64,
}

/// One FIFO per task type, shared by all vehicles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueState {
    pub queues: Vec<VecDeque<PendingTask>>,
}

impl QueueState {
    pub fn new(num_types: usize) -> Self {
        QueueState {
            queues: vec![VecDeque::new(); num_types],
        }
    }

    pub fn num_types(&self) -> usize {
        self.queues.len()
    }

    pub fn push(&mut self, task: Task) {
        let k = task.type_k;
        let remaining_bytes = task.size_bytes as f64;
        self.queues[k].push_back(PendingTask { task, remaining_bytes });
    }

    pub fn backlog_bytes(&self) -> Vec<f64> {
        self.queues
            .iter()
            .map(|q| q.iter().map(|p| p.remaining_bytes).sum())
            .collect()
    }

    pub fn total_backlog_bytes(&self) -> f64 {
        self.backlog_bytes().iter().sum()
    }

    pub fn len(&self) -> usize {
        self.queues.iter().map(|q| q.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pending bytes per vehicle and type.
    pub fn vehicle_backlogs(&self) -> BTreeMap<u64, Vec<f64>> {
        let k = self.num_types();
        let mut out: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (ty, q) in self.queues.iter().enumerate() {
            for p in q {
                out.entry(p.task.vehicle_id).or_insert_with(|| vec![0.0; k])[ty] += p.remaining_bytes;
            }
        }
        out
    }

    /// Removes every task belonging to a vehicle not in `keep`; returns the
    /// dropped bytes per type.
    pub fn drop_vehicles_not_in(&mut self, keep: &dyn Fn(u64) -> bool) -> Vec<f64> {
        let mut dropped = vec![0.0; self.num_types()];
        for (k, q) in self.queues.iter_mut().enumerate() {
            q.retain(|p| {
                if keep(p.task.vehicle_id) {
                    true
                } else {
                    dropped[k] += p.remaining_bytes;
                    false
                }
            });
        }
        dropped
    }
}

/// Lindley recursion `q(t+1) = max(q(t) − served, 0) + arrived`.
pub fn lindley(backlog: f64, served: f64, arrived: f64) -> f64 {
    (backlog - served).max(0.0) + arrived
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::params::SimParams;

    #[test]
    fn backlog_is_sum_of_pending() {
        let p = SimParams::default();
        let mut q = QueueState::new(2);
        q.push(Task::new(0, 1, 0, 1000, 0, 0.0, &p));
        q.push(Task::new(1, 2, 0, 1200, 0, 0.0, &p));
        q.push(Task::new(2, 1, 1, 1500, 0, 0.0, &p));
        assert_eq!(q.backlog_bytes(), vec![2200.0, 1500.0]);
        let per = q.vehicle_backlogs();
        assert_eq!(per[&1], vec![1000.0, 1500.0]);
        assert_eq!(per[&2], vec![1200.0, 0.0]);
    }

    #[test]
    fn lindley_floor() {
        assert_eq!(lindley(100.0, 300.0, 50.0), 50.0);
        assert_eq!(lindley(500.0, 300.0, 50.0), 250.0);
    }

    #[test]
    fn drop_by_vehicle() {
        let p = SimParams::default();
        let mut q = QueueState::new(1);
        q.push(Task::new(0, 1, 0, 1000, 0, 0.0, &p));
        q.push(Task::new(1, 2, 0, 1100, 0, 0.0, &p));
        let dropped = q.drop_vehicles_not_in(&|id| id == 1);
        assert_eq!(dropped, vec![1100.0]);
        assert_eq!(q.backlog_bytes(), vec![1000.0]);
    }
}
