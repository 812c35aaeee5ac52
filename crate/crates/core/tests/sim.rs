mod common;

use common::params;
use proptest::prelude::*;
use rand::Rng;
use vecorch::orchestrators::{evaluate_objective, ObjectiveConfig, PolicyTag};
use vecorch::pdt::{predict_rates, StateMode};
use vecorch::sim::channel::{rate_at_position, shannon_rate};
use vecorch::sim::{execute_slot, spawn_vehicles, ChannelState, ExecOptions, Population, QueueState, Task, VehicleState};
use vecorch::{BetaWeights, Decision, PredictiveState, SimParams, World};

/// Uplink rate from first principles: log-distance loss, then Shannon.
fn rate_by_hand(position_m: f64, share_hz: f64) -> f64 {
    let along: f64 = position_m - 1000.0;
    let d = (along * along + 10.0 * 10.0).sqrt().max(1.0);
    let pl_db = 30.0 + 30.0 * d.log10();
    let noise_w = 1e-3 * 10f64.powf(-110.0 / 10.0);
    share_hz * (1.0 + 0.2 * 10f64.powf(-pl_db / 10.0) / noise_w).log2()
}

fn vehicle(id: u64, x: f64) -> VehicleState {
    VehicleState {
        id,
        position_m: x,
        velocity_mps: 0.0,
        active: true,
        channel: ChannelState::default(),
    }
}

fn single(w: f64, a: f64) -> Decision {
    Decision {
        slot: 1,
        vehicle_ids: vec![0],
        offload: vec![vec![w]],
        alloc: vec![vec![a]],
        policy: PolicyTag::Sp,
        flags: Default::default(),
    }
}

#[test]
fn table_rate_example() {
    let r = shannon_rate(2e6, 0.2 * 1e-9 / 1e-14);
    assert!((r - 2e6 * (1.0f64 + 2e4).log2()).abs() < 1e-6);
    assert!((r / 1e6 - 28.6).abs() < 0.05, "{r}");
}

#[test]
fn executor_matches_single_task_oracle() {
    let p = params(1);
    for (x, w, a) in [(1300.0, 1.0, 0.1), (1000.0, 0.5, 0.05), (200.0, 0.25, 0.3), (1900.0, 0.0, 0.0), (600.0, 1.0, 1.0)] {
        let mut q = QueueState::new(1);
        q.push(Task::new(0, 0, 0, 1000, 0, 0.0, &p));
        let (next, out) = execute_slot(&q, &[], &single(w, a), &[vehicle(0, x)], &p, &ExecOptions::new(1)).unwrap();
        assert!(next.is_empty());

        let rate = rate_by_hand(x, 20e6);
        let cycles = 1000.0 * 0.25e6;
        let t_local = (1.0 - w) * cycles / 5e9;
        let t_tx = if w > 0.0 { 8.0 * 1000.0 * w / rate } else { 0.0 };
        let t_srv = if w > 0.0 { w * cycles / (a * 400e9) } else { 0.0 };
        let latency = 0.1 + t_local.max(t_tx + t_srv);
        let energy = 0.2 * t_tx + 1e-28 * 25e18 * (1.0 - w) * cycles + 1e-28 * (a * 400e9).powi(2) * w * cycles;

        let c = &out.completions[0];
        assert!((c.latency_s - latency).abs() < 1e-12, "x={x}: {} vs {latency}", c.latency_s);
        assert!((out.slot_energy_j - energy).abs() <= 1e-9 * energy, "x={x}: {} vs {energy}", out.slot_energy_j);
        assert_eq!(c.met_deadline, latency <= 0.15);
    }
}

#[test]
fn worked_example_hand_trace() {
    // the 28.6 Mbit/s case: only the rate differs from the defaults
    let t_tx: f64 = 8000.0 / 28.6e6;
    assert!((t_tx * 1e3 - 0.28).abs() < 0.005);
    assert!((2.5e8 / (0.1 * 400e9) * 1e3 - 6.25f64).abs() < 1e-12);
    assert!((0.2 * t_tx - 5.6e-5).abs() < 1e-6);
}

#[test]
fn predicted_rate_at_server_is_offset_distance_rate() {
    let p = SimParams::default();
    let pred = predict_rates(&[vec![1000.0]], &[ChannelState::default()], p.bandwidth_hz, &p);
    let d10 = shannon_rate(p.bandwidth_hz, 0.2 * 10f64.powf(-(30.0 + 30.0) / 10.0) / p.noise_power_w);
    assert!((pred[0][0] - d10).abs() <= 1e-9 * d10);
    assert_eq!(pred[0][0], rate_at_position(1000.0, &ChannelState::default(), p.bandwidth_hz, &p));
}

#[test]
fn objective_energy_matches_realized_energy() {
    let p = params(1);
    let cfg = ObjectiveConfig::default();
    for (x, w, a) in [(1300.0, 1.0, 0.1), (700.0, 0.6, 0.2), (1000.0, 0.0, 0.0), (50.0, 0.3, 0.02)] {
        let rate = rate_at_position(x, &ChannelState::default(), p.bandwidth_hz, &p);
        let state = PredictiveState {
            slot_index: 1,
            horizon: 1,
            mode: StateMode::Oracle,
            vehicle_ids: vec![0],
            current_positions_m: vec![x],
            current_rates_bps: vec![rate],
            predicted_positions_m: vec![vec![x]],
            predicted_rates_bps: vec![vec![rate]],
            predicted_arrivals_bytes: vec![vec![0.0]],
            current_backlogs_bytes: vec![1000.0],
            vehicle_backlogs_bytes: vec![vec![1000.0]],
            bandwidth_share_hz: p.bandwidth_hz,
            low_confidence: false,
        };
        let d = single(w, a);
        let ob = evaluate_objective(&d, &state, &BetaWeights::balanced(), &p, &cfg).unwrap();
        let mut q = QueueState::new(1);
        q.push(Task::new(0, 0, 0, 1000, 0, 0.0, &p));
        let (_, out) = execute_slot(&q, &[], &d, &[vehicle(0, x)], &p, &ExecOptions::new(1)).unwrap();
        assert!(
            (ob.predicted_energy_j - out.slot_energy_j).abs() <= 1e-9 * out.slot_energy_j,
            "x={x} w={w}: {} vs {}",
            ob.predicted_energy_j,
            out.slot_energy_j
        );
        assert!((ob.energy_term - ob.predicted_energy_j / cfg.energy_unit_j).abs() < 1e-15);
    }
}

#[test]
fn vehicle_entries_follow_the_configured_rate() {
    let p = SimParams {
        vehicle_arrival_rate: 2.0,
        ..SimParams::default()
    };
    let total: usize = (0..10_000).map(|s| spawn_vehicles(&p, 42, s, 0).len()).sum();
    let mean = total as f64 / 10_000.0;
    assert!((1.9..=2.1).contains(&mean), "{mean}");
}

#[test]
fn empty_world_records_nothing() {
    let mut w = World::new(params(2), 1, Population::Fixed(0), None).unwrap();
    for _ in 0..50 {
        let out = w.step(&Decision::all_local(w.slot(), vec![], 2)).unwrap();
        assert_eq!(out.slot_energy_j, 0.0);
        assert!(out.completions.is_empty());
        assert_eq!(out.arrived_bytes, vec![0.0, 0.0]);
    }
}

/// A random valid decision for whoever is on the road.
fn random_decision(world: &World, r: &mut impl Rng) -> Decision {
    let ids: Vec<u64> = world.vehicles().iter().map(|v| v.id).collect();
    let k = world.params().num_task_types();
    let mut d = Decision::all_local(world.slot(), ids.clone(), k);
    let mut left = 1.0;
    for n in 0..ids.len() {
        for j in 0..k {
            if r.random_bool(0.5) {
                d.offload[n][j] = r.random_range(0.0..=1.0);
                if d.offload[n][j] > 0.0 {
                    let a = r.random_range(0.0..=left * 0.5);
                    d.alloc[n][j] = a;
                    left -= a;
                }
            }
        }
    }
    d
}

fn run(seed: u64, n: usize, dseed: u64, slots: usize, drop: bool) -> Vec<vecorch::sim::SlotOutcome> {
    let mut world = World::new(params(2), seed, Population::Fixed(n), None).unwrap();
    if drop {
        world.departure = vecorch::sim::DeparturePolicy::Drop;
    }
    let mut r = common::rng(dseed);
    (0..slots)
        .map(|_| {
            let d = random_decision(&world, &mut r);
            world.step(&d).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bytes_are_conserved(seed in 0u64..1000, n in 0usize..16, dseed in any::<u64>(), drop in any::<bool>()) {
        let outs = run(seed, n, dseed, 100, drop);
        let sum = |f: &dyn Fn(&vecorch::sim::SlotOutcome) -> f64| outs.iter().map(f).sum::<f64>();
        let arrived = sum(&|o| o.arrived_bytes.iter().sum());
        let served = sum(&|o| o.served_bytes.iter().sum());
        let dropped = sum(&|o| o.dropped_bytes.iter().sum());
        let backlog: f64 = outs.last().unwrap().backlog_bytes.iter().sum();
        prop_assert!((arrived - served - dropped - backlog).abs() <= 1e-6 * arrived.max(1.0));
        for o in &outs {
            prop_assert!(o.backlog_bytes.iter().all(|&b| b >= 0.0));
            prop_assert!(o.slot_energy_j >= 0.0);
            prop_assert!(o.completions.iter().all(|c| c.latency_s >= 0.0));
        }
    }

    #[test]
    fn identical_inputs_identical_outcomes(seed in 0u64..1000, n in 1usize..12, dseed in any::<u64>()) {
        prop_assert_eq!(run(seed, n, dseed, 60, false), run(seed, n, dseed, 60, false));
    }

    #[test]
    fn energy_is_additive_over_tasks(seed in 0u64..1000, n in 1usize..12, dseed in any::<u64>()) {
        for o in run(seed, n, dseed, 60, false) {
            let parts: f64 = o.task_energy_j.iter().map(|(_, e)| e).sum();
            prop_assert!((parts - o.slot_energy_j).abs() <= 1e-9 * o.slot_energy_j.max(1e-12));
            prop_assert!((o.energy.total() - o.slot_energy_j).abs() <= 1e-9 * o.slot_energy_j.max(1e-12));
        }
    }
}
