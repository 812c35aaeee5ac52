//! Per-slot solver: coordinate search over `(ω, α)` pairs.
//!
//! Each sweep visits every vehicle/type pair that has queued work and
//! re-optimises its `(ω, α)` on a coarse grid followed by a local fine grid,
//! with `α` capped by whatever budget the other pairs leave. When the budget
//! is exhausted, pairwise transfers move CPU share between pairs, which
//! single-coordinate moves cannot do once `Σ α` sits on the constraint.

use serde::{Deserialize, Serialize};

use super::greedy::{greedy_decide, GreedyConfig};
use super::objective::{ObjectiveConfig, Problem, EMPTY_BYTES};
use super::{Decision, DecisionFlags, PolicyTag};
use crate::pdt::PredictiveState;
use crate::semantics::BetaWeights;
use crate::sim::SimParams;

/// Improvements smaller than this end the search.
const IMPROVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub objective: ObjectiveConfig,
    pub coarse_step: f64,
    pub fine_step: f64,
    /// Half-width of the fine grid around the coarse optimum.
    pub refine_radius: f64,
    pub max_sweeps: usize,
    /// Extra small `α` values tried on the coarse pass.
    pub coarse_extra_alloc: Vec<f64>,
    pub transfer_steps: Vec<f64>,
    pub greedy: GreedyConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            objective: ObjectiveConfig::default(),
            coarse_step: 0.1,
            fine_step: 0.01,
            refine_radius: 0.05,
            max_sweeps: 10,
            coarse_extra_alloc: vec![0.01, 0.02, 0.03, 0.05],
            transfer_steps: vec![0.1, 0.05, 0.02, 0.01],
            greedy: GreedyConfig::default(),
        }
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| round_to(lo + i as f64 * step, step)).filter(|&x| x <= hi + 1e-12).collect()
}

/// Snap to the step's decimal grid so repeated sums do not drift.
fn round_to(x: f64, step: f64) -> f64 {
    let scale = (1.0 / step).round();
    (x * scale).round() / scale
}

struct Search<'a> {
    p: &'a Problem,
    cfg: &'a SolverConfig,
    w: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    cost: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl<'a> Search<'a> {
    fn new(p: &'a Problem, cfg: &'a SolverConfig, w: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> Self {
        let pairs = (0..p.num_vehicles())
            .flat_map(|n| (0..p.num_types()).map(move |k| (n, k)))
            .filter(|&(n, k)| p.backlog(n, k) > EMPTY_BYTES)
            .collect();
        let cost = (0..p.num_vehicles()).map(|n| p.vehicle_cost(n, &w[n], &a[n])).collect();
        Search { p, cfg, w, a, cost, pairs }
    }

    fn total(&self) -> f64 {
        self.cost.iter().sum()
    }

    fn alloc_sum(&self) -> f64 {
        self.a.iter().flatten().sum()
    }

    /// Best `(ω, α)` for one pair over the candidate lists, others fixed.
    fn best_on(&self, n: usize, k: usize, ws: &[f64], alphas: &[f64], cap: f64) -> (f64, f64, f64) {
        let mut w_row = self.w[n].clone();
        let mut a_row = self.a[n].clone();
        let mut best = (self.cost[n], self.w[n][k], self.a[n][k]);
        for &om in ws {
            for &al in alphas {
                if al > cap + 1e-12 || (om == 0.0 && al > 0.0) {
                    continue;
                }
                w_row[k] = om;
                a_row[k] = al;
                let c = self.p.vehicle_cost(n, &w_row, &a_row);
                if c < best.0 - IMPROVE_EPS {
                    best = (c, om, al);
                }
            }
        }
        best
    }

    /// Coarse-then-fine move on one pair. Returns whether it improved.
    fn optimise_pair(&mut self, n: usize, k: usize, cap: f64) -> bool {
        let cfg = self.cfg;
        let ws = grid(0.0, 1.0, cfg.coarse_step);
        let mut alphas = grid(0.0, 1.0, cfg.coarse_step);
        alphas.extend(cfg.coarse_extra_alloc.iter().copied());
        let cap_snap = (cap / cfg.fine_step + 1e-9).floor() * cfg.fine_step;
        if cap_snap > 0.0 {
            alphas.push(round_to(cap_snap, cfg.fine_step));
        }
        let (c0, w0, a0) = self.best_on(n, k, &ws, &alphas, cap);

        let r = cfg.refine_radius;
        let fine_w = grid((w0 - r).max(0.0), (w0 + r).min(1.0), cfg.fine_step);
        let fine_a = grid((a0 - r).max(0.0), (a0 + r).min(1.0), cfg.fine_step);
        let before = self.cost[n];
        self.w[n][k] = w0;
        self.a[n][k] = a0;
        self.cost[n] = c0;
        let (c1, w1, a1) = self.best_on(n, k, &fine_w, &fine_a, cap);
        self.w[n][k] = w1;
        self.a[n][k] = a1;
        self.cost[n] = c1;
        c1 < before - IMPROVE_EPS
    }

    fn sweep(&mut self) -> bool {
        let mut improved = false;
        for i in 0..self.pairs.len() {
            let (n, k) = self.pairs[i];
            let cap = (self.p.budget() - (self.alloc_sum() - self.a[n][k])).max(0.0);
            improved |= self.optimise_pair(n, k, cap);
        }
        for i in 0..self.pairs.len() {
            for j in i + 1..self.pairs.len() {
                let ((n, k1), (m, k2)) = (self.pairs[i], self.pairs[j]);
                if n == m {
                    improved |= self.joint_move(n, k1, k2);
                }
            }
        }
        let mut i = 0;
        while i < self.pairs.len() {
            let n = self.pairs[i].0;
            let ks: Vec<usize> = self.pairs[i..].iter().take_while(|p| p.0 == n).map(|p| p.1).collect();
            i += ks.len();
            if ks.len() > 1 {
                improved |= self.vehicle_move(n, &ks);
            }
        }
        improved
    }

    /// Shifts every active type of vehicle `n` by the same share and lets
    /// each re-pick its ratio. Reaches points where local and offload
    /// completion stay balanced while both move, which pair moves miss.
    fn vehicle_move(&mut self, n: usize, ks: &[usize]) -> bool {
        let before = self.cost[n];
        let step = self.cfg.fine_step;
        for _ in 0..100 {
            let own: f64 = ks.iter().map(|&k| self.a[n][k]).sum();
            let cap = (self.p.budget() - (self.alloc_sum() - own)).max(0.0);
            let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
            for &d in &self.cfg.transfer_steps {
                for d in [d, -d] {
                    let mut a = self.a[n].clone();
                    let mut w = self.w[n].clone();
                    for &k in ks {
                        a[k] = round_to((a[k] + d).clamp(0.0, 1.0), step);
                    }
                    if ks.iter().map(|&k| a[k]).sum::<f64>() > cap + 1e-12 {
                        continue;
                    }
                    for _ in 0..2 {
                        for &k in ks {
                            w[k] = self.best_ratio(n, &w, &a, k);
                        }
                    }
                    let c = self.p.vehicle_cost(n, &w, &a);
                    if c < best.as_ref().map_or(self.cost[n], |b| b.0) - IMPROVE_EPS {
                        best = Some((c, w, a));
                    }
                }
            }
            let Some((c, w, a)) = best else { break };
            self.w[n] = w;
            self.a[n] = a;
            self.cost[n] = c;
        }
        self.cost[n] < before - IMPROVE_EPS
    }

    /// Best ratio for type `k` of vehicle `n` given the rest of its row.
    fn best_ratio(&self, n: usize, w: &[f64], a: &[f64], k: usize) -> f64 {
        let mut row = w.to_vec();
        let mut best = (f64::INFINITY, w[k]);
        for om in self.ratio_candidates_around(w[k]) {
            if om == 0.0 && a[k] > 0.0 {
                continue;
            }
            row[k] = om;
            let c = self.p.vehicle_cost(n, &row, a);
            if c < best.0 {
                best = (c, om);
            }
        }
        best.1
    }

    /// Moves two types of one vehicle together: first both shares with the
    /// ratios fixed, then both ratios with the shares fixed. The vehicle's
    /// latency is the slower of its types, so single-pair moves can stall.
    fn joint_move(&mut self, n: usize, k1: usize, k2: usize) -> bool {
        let before = self.cost[n];
        let cap = (self.p.budget() - (self.alloc_sum() - self.a[n][k1] - self.a[n][k2])).max(0.0);
        let mut alphas = grid(0.0, 1.0, self.cfg.coarse_step);
        alphas.extend(self.cfg.coarse_extra_alloc.iter().copied());
        let ws = grid(0.0, 1.0, self.cfg.coarse_step);
        let mut w = self.w[n].clone();
        let mut a = self.a[n].clone();
        let mut best = (before, a[k1], a[k2]);
        if w[k1] > 0.0 && w[k2] > 0.0 {
            for &x in &alphas {
                for &y in &alphas {
                    if x + y > cap + 1e-12 {
                        continue;
                    }
                    a[k1] = x;
                    a[k2] = y;
                    let c = self.p.vehicle_cost(n, &w, &a);
                    if c < best.0 - IMPROVE_EPS {
                        best = (c, x, y);
                    }
                }
            }
        }
        a[k1] = best.1;
        a[k2] = best.2;
        let mut best_w = (best.0, w[k1], w[k2]);
        for &x in &ws {
            for &y in &ws {
                if (x == 0.0 && a[k1] > 0.0) || (y == 0.0 && a[k2] > 0.0) {
                    continue;
                }
                w[k1] = x;
                w[k2] = y;
                let c = self.p.vehicle_cost(n, &w, &a);
                if c < best_w.0 - IMPROVE_EPS {
                    best_w = (c, x, y);
                }
            }
        }
        w[k1] = best_w.1;
        w[k2] = best_w.2;
        self.w[n] = w;
        self.a[n] = a;
        self.cost[n] = best_w.0;
        self.cost[n] < before - IMPROVE_EPS
    }

    /// Offload ratios tried when a pair's share changes: the coarse grid
    /// plus a fine neighbourhood of the current ratio.
    fn ratio_candidates(&self, n: usize, k: usize) -> Vec<f64> {
        self.ratio_candidates_around(self.w[n][k])
    }

    fn ratio_candidates_around(&self, w0: f64) -> Vec<f64> {
        let cfg = self.cfg;
        let mut ws = grid(0.0, 1.0, cfg.coarse_step);
        ws.extend(grid((w0 - cfg.refine_radius).max(0.0), (w0 + cfg.refine_radius).min(1.0), cfg.fine_step));
        ws
    }

    /// Best cost of vehicle `n` with pair `k`'s share set to `alpha`,
    /// re-choosing that pair's ratio. Returns `(cost, ratio)`.
    fn reprice(&self, n: usize, k: usize, alpha: f64) -> (f64, f64) {
        let mut w = self.w[n].clone();
        let mut a = self.a[n].clone();
        a[k] = alpha;
        let mut best = (f64::INFINITY, w[k]);
        for om in self.ratio_candidates(n, k) {
            if om == 0.0 && alpha > 0.0 {
                continue;
            }
            w[k] = om;
            let c = self.p.vehicle_cost(n, &w, &a);
            if c < best.0 {
                best = (c, om);
            }
        }
        best
    }

    /// Moves `δ` of CPU share from one pair to another when that helps,
    /// letting both pairs re-pick their ratio. Pairs of different vehicles
    /// are independent, so each side is priced once per round.
    fn transfers(&mut self) -> bool {
        let mut improved = false;
        let fine = self.cfg.fine_step;
        for &delta in &self.cfg.transfer_steps.clone() {
            let step = fine.min(delta);
            loop {
                let m = self.pairs.len();
                let mut up = vec![(f64::NEG_INFINITY, 0.0); m];
                let mut down = vec![(f64::NEG_INFINITY, 0.0); m];
                for (i, &(n, k)) in self.pairs.iter().enumerate() {
                    if self.a[n][k] + delta <= 1.0 + 1e-12 {
                        let (c, om) = self.reprice(n, k, round_to(self.a[n][k] + delta, step));
                        up[i] = (self.cost[n] - c, om);
                    }
                    if self.a[n][k] >= delta - 1e-12 {
                        let (c, om) = self.reprice(n, k, round_to((self.a[n][k] - delta).max(0.0), step));
                        down[i] = (self.cost[n] - c, om);
                    }
                }
                let mut best: Option<(f64, usize, usize)> = None;
                for i in 0..m {
                    if !up[i].0.is_finite() {
                        continue;
                    }
                    for j in 0..m {
                        if i == j || !down[j].0.is_finite() {
                            continue;
                        }
                        let (ni, ki) = self.pairs[i];
                        let (nj, kj) = self.pairs[j];
                        let gain = if ni == nj { self.same_vehicle_gain(ni, ki, kj, delta) } else { up[i].0 + down[j].0 };
                        if gain > IMPROVE_EPS && best.is_none_or(|b| gain > b.0) {
                            best = Some((gain, i, j));
                        }
                    }
                }
                let Some((_, i, j)) = best else { break };
                let (ni, ki) = self.pairs[i];
                let (nj, kj) = self.pairs[j];
                self.a[ni][ki] = round_to(self.a[ni][ki] + delta, step);
                self.a[nj][kj] = round_to((self.a[nj][kj] - delta).max(0.0), step);
                if ni != nj {
                    self.w[ni][ki] = up[i].1;
                    self.w[nj][kj] = down[j].1;
                    self.cost[nj] = self.p.vehicle_cost(nj, &self.w[nj], &self.a[nj]);
                }
                self.cost[ni] = self.p.vehicle_cost(ni, &self.w[ni], &self.a[ni]);
                improved = true;
            }
        }
        improved
    }

    fn same_vehicle_gain(&self, n: usize, ki: usize, kj: usize, delta: f64) -> f64 {
        if self.w[n][ki] <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut a = self.a[n].clone();
        a[ki] += delta;
        a[kj] = (a[kj] - delta).max(0.0);
        self.cost[n] - self.p.vehicle_cost(n, &self.w[n], &a)
    }

    fn run(&mut self) {
        for _ in 0..self.cfg.max_sweeps {
            let mut improved = self.sweep();
            if self.alloc_sum() >= self.p.budget() - self.cfg.fine_step {
                improved |= self.transfers();
            }
            if !improved {
                break;
            }
        }
    }
}

/// Scales `a` down proportionally so that `Σ a ≤ budget`.
pub fn project_budget(a: &mut [Vec<f64>], budget: f64) -> bool {
    let sum: f64 = a.iter().flatten().sum();
    if sum <= budget {
        return false;
    }
    let s = budget / sum;
    for x in a.iter_mut().flatten() {
        *x *= s;
    }
    true
}

/// Zeroes entries of pairs with no queued work (they cannot change the
/// objective but would hold budget).
fn clear_idle(p: &Problem, w: &mut [Vec<f64>], a: &mut [Vec<f64>]) {
    for n in 0..p.num_vehicles() {
        for k in 0..p.num_types() {
            if p.backlog(n, k) <= EMPTY_BYTES {
                w[n][k] = 0.0;
                a[n][k] = 0.0;
            }
        }
    }
}

/// Per-pair optimum ignoring the budget, then projected onto it.
fn unconstrained_start(p: &Problem, cfg: &SolverConfig) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let zeros = vec![vec![0.0; p.num_types()]; p.num_vehicles()];
    let mut s = Search::new(p, cfg, zeros.clone(), zeros);
    for i in 0..s.pairs.len() {
        let (n, k) = s.pairs[i];
        s.optimise_pair(n, k, 1.0);
    }
    let (w, mut a) = (s.w, s.a);
    project_budget(&mut a, p.budget());
    (w, a)
}

/// Raw search result: `(w, a)` rows aligned with the state's vehicles.
pub fn solve_rows(problem: &Problem, greedy_start: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>, cfg: &SolverConfig) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let zeros = vec![vec![0.0; problem.num_types()]; problem.num_vehicles()];
    let mut starts = vec![(zeros.clone(), zeros), unconstrained_start(problem, cfg)];
    if let Some(g) = greedy_start {
        starts.push(g);
    }
    let mut best: Option<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
    for (mut w, mut a) in starts {
        clear_idle(problem, &mut w, &mut a);
        let c = problem.cost_rows(&w, &a);
        if best.as_ref().is_none_or(|b| c < b.0) {
            best = Some((c, w, a));
        }
    }
    let (_, w, a) = best.expect("at least one start");
    let mut s = Search::new(problem, cfg, w, a);
    s.run();
    debug_assert!(s.total().is_finite());
    let (w, mut a) = (s.w, s.a);
    // guard against rounding pushing the sum a hair over the budget
    if a.iter().flatten().sum::<f64>() > problem.budget() {
        project_budget(&mut a, problem.budget() * (1.0 - 1e-12));
    }
    (w, a)
}

/// Drift-plus-penalty decision for one slot.
pub fn solve_per_slot(state: &PredictiveState, beta: &BetaWeights, params: &SimParams, cfg: &SolverConfig) -> Decision {
    solve_tagged(state, beta, params, cfg, PolicyTag::Sp)
}

/// Same solver on a reactive state (current values as forecasts).
pub fn reactive_decide(state: &PredictiveState, beta: &BetaWeights, params: &SimParams, cfg: &SolverConfig) -> Decision {
    solve_tagged(state, beta, params, cfg, PolicyTag::Reactive)
}

fn solve_tagged(state: &PredictiveState, beta: &BetaWeights, params: &SimParams, cfg: &SolverConfig, tag: PolicyTag) -> Decision {
    let problem = Problem::new(state, beta, params, &cfg.objective);
    let g = greedy_decide(state, params, &cfg.greedy, &cfg.objective);
    let (w, a) = solve_rows(&problem, Some((g.offload, g.alloc)), cfg);
    Decision {
        slot: state.slot_index,
        vehicle_ids: state.vehicle_ids.clone(),
        offload: w,
        alloc: a,
        policy: tag,
        flags: DecisionFlags::default(),
    }
}
