use bafdp_core::adversary::{AttackKind, AttackSpec};
use bafdp_core::data::{
    build_federated, generate_synthetic, FederatedData, HolidayCalendar, PartitionScheme,
    SyntheticProfile, WindowConfig,
};
use bafdp_core::metrics::comm_volume;
use bafdp_core::objective::HyperParams;
use bafdp_core::privacy::PrivacyConfig;
use bafdp_core::protocol::{
    simulate, DelayModel, Method, ProtocolConfig, Simulation, SyncReference, TraceDetail,
};
use bafdp_core::trace::EventKind;

const SEED: u64 = 11;

fn data(r: usize) -> FederatedData {
    let series = generate_synthetic(r, 14, SEED, &SyntheticProfile::default()).unwrap();
    build_federated(
        &series,
        &WindowConfig::default(),
        &HolidayCalendar::new(Vec::new()),
        r,
        PartitionScheme::ByCell,
        SEED,
    )
    .unwrap()
}

fn config(method: Method, r: usize, s: usize, data: &FederatedData) -> ProtocolConfig {
    ProtocolConfig {
        method,
        n_clients: r,
        n_byzantine: 0,
        quorum: s,
        iterations: 150,
        hp: HyperParams::default(),
        privacy: PrivacyConfig {
            dim: data.d_x() + data.d_y(),
            ..PrivacyConfig::default()
        },
        hidden: vec![4],
        kappa: 0.01,
        power_iters: 10,
        batch_size: 16,
        eval_every: 50,
        gap_every: 50,
        gap_target: None,
        attack: None,
        delays: vec![DelayModel::default(); r],
        detail: TraceDetail::Full,
    }
}

#[test]
fn same_seed_same_trace() {
    let d = data(5);
    let cfg = config(Method::Bafdp, 5, 2, &d);
    let a = simulate(&cfg, &d, SEED, "fp".into()).unwrap();
    let b = simulate(&cfg, &d, SEED, "fp".into()).unwrap();
    assert_eq!(a, b);
    let c = simulate(&cfg, &d, SEED + 1, "fp".into()).unwrap();
    assert_ne!(a.events, c.events);
}

#[test]
fn trace_is_ordered_and_accounts_bytes() {
    let d = data(5);
    let cfg = config(Method::Bafdp, 5, 3, &d);
    let trace = simulate(&cfg, &d, SEED, "fp".into()).unwrap();
    for w in trace.events.windows(2) {
        assert!(w[0].virtual_time <= w[1].virtual_time);
        assert!(w[0].iteration <= w[1].iteration);
    }
    let servers: Vec<_> = trace.events.iter().filter(|e| e.kind == EventKind::ServerStep).collect();
    assert_eq!(servers.len() as u64, cfg.iterations);
    let dim = 23 * 4 + 4 + 4 + 1;
    for s in &servers {
        assert_eq!(s.bytes_transferred, Some(comm_volume(dim * 8, 3, 1)));
        assert_eq!(s.eps_per_client.as_ref().unwrap().len(), 5);
    }
    let duals = trace.events.iter().filter(|e| e.kind == EventKind::DualStep).count();
    assert_eq!(duals as u64, 3 * cfg.iterations);
    let evals: Vec<u64> = trace.evals().map(|e| e.iteration).collect();
    assert_eq!(evals, vec![0, 50, 100, 150]);
    assert!(trace.events.iter().filter(|e| e.stationarity_gap.is_some()).count() == 3);
}

#[test]
fn straggler_is_stale_but_alive() {
    let d = data(4);
    let mut cfg = config(Method::Bafdp, 4, 2, &d);
    cfg.iterations = 400;
    cfg.delays[0].multiplier = 10.0;
    let mut sim = Simulation::new(&cfg, &d, SEED, "fp".into()).unwrap();
    while sim.advance().unwrap() {}
    let acts: Vec<u64> = sim.clients().iter().map(|c| c.activations).collect();
    assert!(acts.iter().all(|&a| a > 0), "{acts:?}");
    assert!(acts[1..].iter().all(|&a| a > 3 * acts[0]), "{acts:?}");
    let (clients, server, _) = sim.into_parts();
    assert_eq!(server.t, 400);
    assert!(clients[0].last_activation < server.t);
}

#[test]
fn synchronous_method_waits_for_everyone() {
    let d = data(4);
    let cfg = config(Method::Bsfdp, 4, 1, &d);
    let trace = simulate(&cfg, &d, SEED, "fp".into()).unwrap();
    let dim = 23 * 4 + 4 + 4 + 1;
    for s in trace.events.iter().filter(|e| e.kind == EventKind::ServerStep) {
        assert_eq!(s.bytes_transferred, Some(comm_volume(dim * 8, 4, 1)));
    }
}

#[test]
fn event_engine_matches_lock_step_reference() {
    let d = data(3);
    let mut cfg = config(Method::Bsfdp, 3, 3, &d);
    cfg.delays = vec![DelayModel::constant(2.5); 3];
    let mut sim = Simulation::new(&cfg, &d, SEED, "fp".into()).unwrap();
    let mut reference = SyncReference::new(&cfg, &d, SEED).unwrap();
    for _ in 0..cfg.iterations {
        assert!(sim.advance().unwrap());
        reference.step().unwrap();
        assert_eq!(sim.server().z, reference.server().z);
        for (a, b) in sim.clients().iter().zip(reference.clients()) {
            assert_eq!(a.omega, b.omega);
            assert_eq!(a.phi, b.phi);
            assert_eq!(a.eps.to_bits(), b.eps.to_bits());
        }
    }
}

#[test]
fn consensus_stays_bounded_under_every_attack() {
    let d = data(6);
    for kind in AttackKind::ALL {
        let mut cfg = config(Method::Bafdp, 6, 3, &d);
        cfg.n_byzantine = 2;
        cfg.attack = Some(AttackSpec {
            kind,
            scale: 1e9,
            collusion_seed: 3,
        });
        cfg.detail = TraceDetail::Server;
        let mut sim = Simulation::new(&cfg, &d, SEED, "fp".into()).unwrap();
        while sim.advance().unwrap() {
            let s = sim.server();
            assert!(s.z.is_finite(), "{kind:?}");
            assert!(s.z.norm() <= cfg.hp.param_radius() * (1.0 + 1e-12), "{kind:?}");
            assert!(s.lambdas().iter().all(|l| (0.0..=cfg.hp.lambda_cap()).contains(l)));
            assert!(s.records.iter().all(|r| r.phi.iter().all(|p| p.is_finite())));
        }
        for c in sim.clients().iter().filter(|c| c.honest) {
            assert!(c.eps >= cfg.hp.epsilon_min);
            assert!(c.omega.norm() <= cfg.hp.param_radius() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn baselines_disable_their_machinery() {
    let d = data(4);
    let fedavg = simulate(&config(Method::Fedavg, 4, 2, &d), &d, SEED, "fp".into()).unwrap();
    assert!(fedavg.events.iter().all(|e| e.stationarity_gap.is_none()));

    let cfg = config(Method::RsaNoDp, 4, 2, &d);
    let mut sim = Simulation::new(&cfg, &d, SEED, "fp".into()).unwrap();
    while sim.advance().unwrap() {}
    assert!(sim.clients().iter().all(|c| c.eps == cfg.hp.epsilon_min));
    assert!(sim.server().lambdas().iter().all(|&l| l == 0.0));
    assert!(sim.last_gap().is_some());
}

#[test]
fn gap_target_stops_early() {
    let d = data(4);
    let mut cfg = config(Method::RsaNoDp, 4, 2, &d);
    cfg.gap_every = 10;
    cfg.gap_target = Some(f64::INFINITY);
    let trace = simulate(&cfg, &d, SEED, "fp".into()).unwrap();
    let last = trace.events.iter().rfind(|e| e.kind == EventKind::ServerStep).unwrap();
    assert_eq!(last.iteration, 10);
    assert_eq!(trace.evals().last().unwrap().iteration, 10);
}

#[test]
fn invalid_config_is_rejected_before_work() {
    let d = data(4);
    let mut cfg = config(Method::Bafdp, 4, 5, &d);
    assert!(simulate(&cfg, &d, SEED, "fp".into()).is_err());
    cfg.quorum = 2;
    cfg.privacy.dim = 7;
    assert!(simulate(&cfg, &d, SEED, "fp".into()).is_err());
}
