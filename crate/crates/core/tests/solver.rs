mod common;

use common::{brute_force_min, params, random_beta, random_state, rng};
use rand::Rng;
use vecorch::orchestrators::{
    evaluate_objective, greedy_decide, reactive_decide, solve_per_slot, ObjectiveConfig, Problem, SolverConfig,
};
use vecorch::pdt::Pdt;
use vecorch::sim::{Population, Volatility};
use vecorch::{BetaWeights, PredictorKind, World};

#[test]
fn objective_is_drift_constant_plus_vehicle_costs() {
    let p = params(2);
    let cfg = ObjectiveConfig::default();
    let mut r = rng(7);
    for _ in 0..50 {
        let n = r.random_range(1..5);
        let s = random_state(&mut r, n, 2, &p);
        let beta = random_beta(&mut r);
        let problem = Problem::new(&s, &beta, &p, &cfg);
        let w: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
        let a: Vec<Vec<f64>> = (0..n).map(|_| vec![0.5 / n as f64, 0.4 / n as f64]).collect();
        let whole = problem.evaluate_rows(&w, &a).total;
        let parts: f64 = problem.drift_const() + (0..n).map(|v| problem.vehicle_cost(v, &w[v], &a[v])).sum::<f64>();
        assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1.0), "{whole} vs {parts}");
    }
}

#[test]
fn solver_within_one_percent_of_grid_search() {
    let cfg = SolverConfig::default();
    let mut r = rng(11);
    for case in 0..20 {
        let n = r.random_range(1..=2);
        let k = r.random_range(1..=2);
        let p = params(k);
        let s = random_state(&mut r, n, k, &p);
        let beta = random_beta(&mut r);
        let d = solve_per_slot(&s, &beta, &p, &cfg);
        let got = evaluate_objective(&d, &s, &beta, &p, &cfg.objective).unwrap().total;
        let best = brute_force_min(&s, &beta, &p, &cfg.objective, 20);
        assert!(
            got - best <= 0.01 * best.abs().max(1e-6),
            "case {case}: solver {got} grid {best}"
        );
    }
}

#[test]
fn greedy_is_strictly_worse_on_most_instances() {
    let cfg = SolverConfig::default();
    let mut r = rng(3);
    let total = 100;
    let mut strict = 0;
    for _ in 0..total {
        let n = r.random_range(2..12);
        let p = params(2);
        let s = random_state(&mut r, n, 2, &p);
        let beta = BetaWeights::balanced();
        let eval = |d| evaluate_objective(&d, &s, &beta, &p, &cfg.objective).unwrap().total;
        let g = eval(greedy_decide(&s, &p, &cfg.greedy, &cfg.objective));
        let o = eval(solve_per_slot(&s, &beta, &p, &cfg));
        assert!(o <= g + 1e-9, "solver {o} worse than greedy {g}");
        if g - o > 1e-9 * o.abs().max(1.0) {
            strict += 1;
        }
    }
    assert!(strict * 10 >= total * 9, "strict gap on {strict}/{total}");
}

#[test]
fn energy_weight_and_unit_trade_off_exactly() {
    // β_E enters only through β_E / energy_unit
    let mut r = rng(5);
    let p = params(2);
    for _ in 0..20 {
        let n = r.random_range(1..6);
        let s = random_state(&mut r, n, 2, &p);
        let mut a = SolverConfig::default();
        let mut b = a.clone();
        a.objective.energy_unit_j = 1e4;
        b.objective.energy_unit_j = 2e4;
        let da = solve_per_slot(&s, &BetaWeights::new(1.0, 1.0), &p, &a);
        let db = solve_per_slot(&s, &BetaWeights::new(2.0, 1.0), &p, &b);
        assert_eq!(da.offload, db.offload);
        assert_eq!(da.alloc, db.alloc);
    }
}

#[test]
fn raising_energy_weight_never_raises_predicted_energy() {
    let cfg = SolverConfig::default();
    let p = params(2);
    let mut r = rng(17);
    let mut bad = Vec::new();
    for case in 0..40 {
        let n = r.random_range(1..10);
        let s = random_state(&mut r, n, 2, &p);
        let mut prev = f64::INFINITY;
        for be in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let beta = BetaWeights::new(be, 1.0);
            let d = solve_per_slot(&s, &beta, &p, &cfg);
            let e = evaluate_objective(&d, &s, &beta, &p, &cfg.objective).unwrap().predicted_energy_j;
            if e > prev * (1.0 + 1e-9) + 1e-12 {
                bad.push(format!("case {case} n={n} β_E={be}: {e:.1} > {prev:.1}"));
            }
            prev = e;
        }
    }
    assert!(bad.is_empty(), "{} increases over 160 steps: {bad:#?}", bad.len());
}

/// Drives a volatile world with the oracle-informed solver and scores both
/// that decision and the reactive one against the realized next slot.
fn realized_objectives(seed: u64, slots: usize) -> (f64, f64) {
    let p = params(2);
    let cfg = SolverConfig::default();
    let beta = BetaWeights::balanced();
    let mut world = World::new(p.clone(), seed, Population::Fixed(15), Some(Volatility::default())).unwrap();
    let mut oracle = Pdt::new(PredictorKind::Oracle.config(), &world);
    let mut reactive = Pdt::new(PredictorKind::Reactive.config(), &world);
    let (mut so, mut sr) = (0.0, 0.0);
    for t in 0..slots {
        let truth = oracle.assemble(&world);
        let now = reactive.assemble(&world);
        let d_o = solve_per_slot(&truth, &beta, &p, &cfg);
        let d_r = reactive_decide(&now, &beta, &p, &cfg);
        if t >= 20 {
            so += evaluate_objective(&d_o, &truth, &beta, &p, &cfg.objective).unwrap().total;
            sr += evaluate_objective(&d_r, &truth, &beta, &p, &cfg.objective).unwrap().total;
        }
        let out = world.step(&d_o).unwrap();
        oracle.observe(&world, &out);
        reactive.observe(&world, &out);
    }
    (so, sr)
}

#[test]
fn reactive_never_beats_oracle_on_realized_futures() {
    for seed in 0..10 {
        let (so, sr) = realized_objectives(seed, 120);
        assert!(sr >= so - 1e-9 * so.abs().max(1.0), "seed {seed}: reactive {sr} < oracle {so}");
    }
}
