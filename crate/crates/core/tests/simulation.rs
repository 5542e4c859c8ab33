use cellres_core::analytic::erlang_b;
use cellres_core::channels::OccupancyFault;
use cellres_core::metrics::{class_loss_probability, handoffs_per_call};
use cellres_core::{
    mean_handoff_latency, simulate, CallClass, ControllerKind, CostWeights, HandoffMode, NetworkConfig,
    ReservationVector, RunOutput, SimOptions, TrainingState,
};
use proptest::prelude::*;

fn small(seed: u64) -> NetworkConfig {
    NetworkConfig {
        num_cells: 3,
        channels_per_cell: 12,
        arrival_rates: [1.2, 1.5, 0.6, 0.9],
        mean_call_duration: 5.0,
        control_period: 20.0,
        sim_duration: 400.0,
        warmup: 40.0,
        seed,
        ..Default::default()
    }
    .with_reservation(ReservationVector::new(2, 2, 2, 2))
}

trait WithReservation {
    fn with_reservation(self, rv: ReservationVector) -> Self;
    fn with_controller(self, kind: ControllerKind) -> Self;
}

impl WithReservation for NetworkConfig {
    fn with_reservation(mut self, rv: ReservationVector) -> Self {
        self.controller.reservation = rv;
        self
    }
    fn with_controller(mut self, kind: ControllerKind) -> Self {
        self.controller.kind = kind;
        self
    }
}

fn queued(mut cfg: NetworkConfig) -> NetworkConfig {
    cfg.queue_capacity = [3, 5, 3, 5];
    cfg.renege_deadline = [Some(1.0), Some(8.0), Some(1.0), None];
    cfg
}

fn run(cfg: &NetworkConfig) -> RunOutput {
    simulate(cfg, &SimOptions::default()).unwrap()
}

fn assert_sound(cfg: &NetworkConfig, out: &RunOutput) {
    assert!(out.conservation_holds(), "per-cell conservation");
    assert!(out.invariant_violations.is_empty(), "{:?}", out.invariant_violations);
    assert!(out.max_busy.iter().all(|&b| b <= cfg.channels_per_cell));
    for rec in &out.windows {
        assert!(rec.window.is_conserved(), "window {} cell {}: {:?}", rec.index, rec.cell, rec.window);
        assert!(rec.reservation.total() <= cfg.channels_per_cell as u64);
    }
    assert!(out.summary.is_conserved());
}

#[test]
fn same_seed_same_trace() {
    for cfg in [small(7), queued(small(7)).with_controller(ControllerKind::La)] {
        let a = run(&cfg);
        let b = run(&cfg);
        assert_eq!(a.trace_digest, b.trace_digest);
        assert_eq!(a.events_processed, b.events_processed);
        assert_eq!(a.windows, b.windows);
        assert_eq!(a.summary, b.summary);
        let c = run(&NetworkConfig { seed: 8, ..cfg.clone() });
        assert_ne!(a.trace_digest, c.trace_digest);
    }
}

#[test]
fn conservation_pure_loss() {
    let cfg = small(1);
    assert_sound(&cfg, &run(&cfg));
}

#[test]
fn conservation_with_queues_and_learning_controllers() {
    for kind in [ControllerKind::Static, ControllerKind::La, ControllerKind::Neural] {
        let cfg = queued(NetworkConfig { load_multiplier: 3.0, ..small(2) }).with_controller(kind);
        let out = run(&cfg);
        assert_sound(&cfg, &out);
        let reneged: u64 = CallClass::ALL.iter().map(|&k| out.summary.class(k).reneged).sum();
        assert!(reneged > 0, "{kind:?}: overload should make someone give up");
    }
}

#[test]
fn conservation_in_mobility_mode() {
    for v in [5.0, 40.0, 200.0] {
        let mut cfg = queued(small(3)).with_controller(ControllerKind::La);
        cfg.handoff_mode = HandoffMode::Mobility;
        cfg.velocity = v;
        cfg.cell_diameter = 200.0;
        cfg.load_multiplier = 2.0;
        let out = run(&cfg);
        assert_sound(&cfg, &out);
        assert!(out.summary.handoff_requests > 0);
    }
}

#[test]
fn pure_loss_latency_is_signalling_delay() {
    for mode in [HandoffMode::Exogenous, HandoffMode::Mobility] {
        let cfg = NetworkConfig { handoff_mode: mode, signaling_delay: 0.25, velocity: 50.0, ..small(4) };
        let out = run(&cfg);
        assert!(out.summary.handoff_waits.iter().all(|&w| w == 0.0));
        assert_eq!(mean_handoff_latency(&out.summary, 0.25), Some(0.25));
    }
}

#[test]
fn queued_handoffs_wait() {
    let cfg = queued(NetworkConfig { load_multiplier: 3.0, ..small(5) });
    let out = run(&cfg);
    let latency = mean_handoff_latency(&out.summary, cfg.signaling_delay).unwrap();
    assert!(latency > cfg.signaling_delay);
    assert!(out.summary.handoff_waits.iter().all(|&w| w >= 0.0));
}

fn single_server(deadline: Option<f64>) -> NetworkConfig {
    let mut cfg = NetworkConfig {
        num_cells: 1,
        channels_per_cell: 1,
        arrival_rates: [2.0, 0.0, 0.0, 0.0],
        mean_call_duration: 1.0,
        queue_capacity: [50, 0, 0, 0],
        sim_duration: 2000.0,
        warmup: 10.0,
        control_period: 100.0,
        seed: 6,
        ..Default::default()
    }
    .with_reservation(ReservationVector::new(0, 1, 0, 0));
    cfg.renege_deadline[0] = deadline;
    cfg
}

#[test]
fn reneging_follows_the_deadline() {
    let patient = run(&single_server(None));
    assert_eq!(patient.summary.class(CallClass::RtO).reneged, 0);

    let impatient_cfg = single_server(Some(0.5));
    let impatient = run(&impatient_cfg);
    assert_sound(&impatient_cfg, &impatient);
    let t = impatient.summary.class(CallClass::RtO);
    assert!(t.reneged > t.arrived / 10, "{t:?}");

    // a deadline far beyond the run behaves like no deadline at all
    let never = run(&single_server(Some(1e9)));
    assert_eq!(never.summary.class(CallClass::RtO).reneged, 0);
    assert_eq!(never.summary, patient.summary);
}

#[test]
fn warmup_is_excluded_from_summary_and_windows() {
    let cfg = small(9);
    let out = run(&cfg);
    let total_arrivals: u64 = out.cell_totals.iter().flat_map(|t| t.iter()).map(|t| t.arrived).sum();
    let counted: u64 = CallClass::ALL.iter().map(|&k| out.summary.class(k).arrived).sum();
    let windowed: u64 = out
        .windows
        .iter()
        .map(|r| CallClass::ALL.iter().map(|&k| r.window.class(k).arrived).sum::<u64>())
        .sum();
    assert!(counted < total_arrivals);
    assert_eq!(windowed, counted);
    assert_eq!(out.summary.start, cfg.warmup);

    // stretching only the warmup moves arrivals out of the measured cohort
    let longer = run(&NetworkConfig { warmup: 200.0, ..cfg.clone() });
    let counted_longer: u64 = CallClass::ALL.iter().map(|&k| longer.summary.class(k).arrived).sum();
    assert!(counted_longer < counted);
    let all_longer: u64 = longer.cell_totals.iter().flat_map(|t| t.iter()).map(|t| t.arrived).sum();
    assert_eq!(all_longer, total_arrivals);
}

#[test]
fn windows_tile_the_measured_interval() {
    for (duration, period) in [(400.0, 20.0), (410.0, 20.0), (45.0, 20.0)] {
        let cfg = NetworkConfig { sim_duration: duration, control_period: period, ..small(10) };
        let out = run(&cfg);
        let expected = ((duration - cfg.warmup) / period).ceil() as usize;
        for cell in 0..cfg.num_cells {
            let mine: Vec<_> = out.windows.iter().filter(|r| r.cell == cell).collect();
            assert_eq!(mine.len(), expected);
            assert_eq!(mine[0].window.start, cfg.warmup);
            assert_eq!(mine.last().unwrap().window.end, duration);
            for (i, pair) in mine.windows(2).enumerate() {
                assert_eq!(pair[0].index, i);
                assert_eq!(pair[0].window.end, pair[1].window.start);
                assert!((pair[0].window.duration() - period).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn carried_load_matches_erlang_b() {
    // single class on a dedicated pool: busy channel-seconds per second is rho (1 - B)
    let mut cfg = NetworkConfig {
        num_cells: 1,
        channels_per_cell: 6,
        arrival_rates: [0.5, 0.0, 0.0, 0.0],
        mean_call_duration: 10.0,
        sim_duration: 60_000.0,
        warmup: 100.0,
        control_period: 1000.0,
        ..Default::default()
    }
    .with_reservation(ReservationVector::new(0, 6, 0, 0));
    cfg.seed = 11;
    let out = run(&cfg);
    let rho = 5.0;
    let b = erlang_b(6, rho).unwrap();
    let pb = class_loss_probability(&out.summary, CallClass::RtO).unwrap();
    assert!((pb - b).abs() < 0.01, "{pb} vs {b}");
    let carried = out.summary.busy_channel_seconds / (cfg.sim_duration - cfg.warmup);
    assert!((carried / (rho * (1.0 - b)) - 1.0).abs() < 0.03, "{carried}");
}

#[test]
fn single_server_with_one_waiting_place() {
    let mut cfg = NetworkConfig {
        num_cells: 1,
        channels_per_cell: 1,
        arrival_rates: [1.0, 0.0, 0.0, 0.0],
        mean_call_duration: 1.0,
        queue_capacity: [1, 0, 0, 0],
        renege_deadline: [None; 4],
        sim_duration: 120_000.0,
        warmup: 100.0,
        control_period: 10_000.0,
        seed: 12,
        ..Default::default()
    }
    .with_reservation(ReservationVector::new(0, 1, 0, 0));
    cfg.controller.kind = ControllerKind::Static;
    let out = run(&cfg);
    let t = out.summary.class(CallClass::RtO);
    assert!(t.arrived >= 100_000);
    let pb = t.refused as f64 / t.arrived as f64;
    assert!((pb - 1.0 / 3.0).abs() < 0.01, "{pb}");
}

#[test]
fn occupancy_fault_shows_in_blocking() {
    let mut cfg = NetworkConfig {
        num_cells: 1,
        channels_per_cell: 6,
        arrival_rates: [0.5, 0.0, 0.0, 0.0],
        mean_call_duration: 10.0,
        sim_duration: 20_000.0,
        warmup: 100.0,
        control_period: 1000.0,
        ..Default::default()
    }
    .with_reservation(ReservationVector::new(0, 6, 0, 0));
    cfg.seed = 13;
    let faulty = simulate(&cfg, &SimOptions { fault: Some(OccupancyFault::DedicatedOffByOne), ..Default::default() })
        .unwrap();
    let pb = class_loss_probability(&faulty.summary, CallClass::RtO).unwrap();
    let five = erlang_b(5, 5.0).unwrap();
    assert!((pb - five).abs() < 0.02, "{pb} vs {five}");
    assert!(pb - erlang_b(6, 5.0).unwrap() > 0.05);
}

#[test]
fn mobility_raises_handoffs_with_speed() {
    let rate = |v: f64| {
        let cfg = NetworkConfig { handoff_mode: HandoffMode::Mobility, velocity: v, cell_diameter: 500.0, ..small(14) };
        handoffs_per_call(&run(&cfg).summary).unwrap()
    };
    let (slow, fast) = (rate(10.0), rate(80.0));
    assert!(fast > slow, "{slow} vs {fast}");
}

#[test]
fn training_state_round_trips_and_resumes() {
    for kind in [ControllerKind::La, ControllerKind::Neural] {
        let cfg = small(15).with_controller(kind);
        let out = run(&cfg);
        let state = out.final_state.clone().expect("learning controllers report state");
        assert_eq!(state.cells.len(), cfg.num_cells);
        let parsed = TrainingState::from_json(&state.to_json()).unwrap();
        assert_eq!(parsed, state);

        let resumed = simulate(&cfg, &SimOptions { warm_start: Some(parsed), ..Default::default() }).unwrap();
        assert_sound(&cfg, &resumed);
        let again = simulate(&cfg, &SimOptions { warm_start: Some(state.clone()), ..Default::default() }).unwrap();
        assert_eq!(resumed.trace_digest, again.trace_digest);
    }
    let out = run(&small(15));
    assert!(out.final_state.is_none());
}

#[test]
fn mismatched_state_is_rejected() {
    let la = run(&small(16).with_controller(ControllerKind::La)).final_state.unwrap();
    let neural_cfg = small(16).with_controller(ControllerKind::Neural);
    assert!(simulate(&neural_cfg, &SimOptions { warm_start: Some(la.clone()), ..Default::default() }).is_err());
    let bigger = NetworkConfig { channels_per_cell: 24, ..small(16) }.with_controller(ControllerKind::La);
    assert!(simulate(&bigger, &SimOptions { warm_start: Some(la), ..Default::default() }).is_err());
}

#[test]
fn oracle_controller_holds_the_optimum() {
    let mut cfg = small(17).with_controller(ControllerKind::Oracle);
    cfg.controller.weights = CostWeights::default();
    let (best, _) = cellres_core::analytic::optimum_for_config(&cfg).unwrap();
    let out = run(&cfg);
    assert!(out.windows.iter().all(|r| r.reservation == best));
    assert!(simulate(&queued(cfg), &SimOptions::default()).is_err());
}

#[test]
fn invalid_config_is_refused() {
    let cfg = NetworkConfig { channels_per_cell: 0, ..small(18) };
    assert!(simulate(&cfg, &SimOptions::default()).is_err());
    let cfg = small(18).with_reservation(ReservationVector::new(4, 4, 4, 4));
    assert!(simulate(&cfg, &SimOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_controller_decision_is_valid(
        seed in 0u64..10_000,
        channels in 1u32..16,
        load in 0.2f64..4.0,
        kind in prop_oneof![Just(ControllerKind::La), Just(ControllerKind::Neural), Just(ControllerKind::Static)],
        mobility in any::<bool>(),
        queues in any::<bool>(),
    ) {
        let mut cfg = NetworkConfig {
            num_cells: 2,
            channels_per_cell: channels,
            arrival_rates: [1.0, 1.0, 0.5, 0.5],
            mean_call_duration: 2.0,
            load_multiplier: load,
            control_period: 5.0,
            sim_duration: 120.0,
            warmup: 10.0,
            seed,
            handoff_mode: if mobility { HandoffMode::Mobility } else { HandoffMode::Exogenous },
            velocity: 100.0,
            ..Default::default()
        }
        .with_reservation(ReservationVector::equal_split(channels))
        .with_controller(kind);
        if queues {
            cfg = queued(cfg);
        }
        let out = simulate(&cfg, &SimOptions::default()).unwrap();
        prop_assert!(out.conservation_holds());
        prop_assert!(out.invariant_violations.is_empty());
        for rec in &out.windows {
            prop_assert!(rec.reservation.total() <= channels as u64);
            prop_assert!(rec.cost.is_finite() && rec.cost >= 0.0);
            prop_assert!(rec.window.is_conserved());
        }
    }
}
