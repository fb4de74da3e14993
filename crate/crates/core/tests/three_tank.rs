use hbg_core::bench::{
    analytic_h1_mode_i, analytic_h2_mode_ii, build_three_tank, crossing_time, oracle_simulate, steady_state, Latch,
    TankParams,
};
use hbg_core::ibd::junction_residuals;
use hbg_core::sim::{simulate_observed, Transition};
use hbg_core::{check_all_modes, compile, parse_model, serialize_model, simulate, IntegratorKind, SimConfig};

fn run(p: &TankParams, cfg: &SimConfig) -> hbg_core::SimTrace {
    let d = compile(&build_three_tank(p)).unwrap();
    simulate(&d, cfg).unwrap()
}

#[test]
fn switch_times_match_closed_forms() {
    let p = TankParams::default();
    let trace = run(&p, &SimConfig::default());
    assert_eq!(trace.len(), 1001);

    let t1 = crossing_time(&trace, "h1", 0.5).unwrap().unwrap();
    assert!((t1 - 1.693).abs() < 0.02, "t1={t1}");
    let t2 = crossing_time(&trace, "h2", 0.5).unwrap().unwrap();
    assert!((t2 - 4.19).abs() < 0.05, "t2={t2}");

    let h1 = trace.probe("h1").unwrap();
    let h2 = trace.probe("h2").unwrap();
    for (k, &t) in trace.times.iter().enumerate() {
        if (1.0..=1.69).contains(&t) {
            assert!((h1[k] - analytic_h1_mode_i(t, &p).unwrap()).abs() < 1e-6, "t={t}");
        }
        if t >= t1 && t <= t2 {
            let expect = analytic_h2_mode_ii(t - t1).unwrap();
            assert!((h2[k] - expect).abs() < 1e-2, "t={t}");
        }
    }

    let first = &trace.events.iter().find(|e| e.junction == "Pipe12L").unwrap();
    assert_eq!(first.transition, Transition::OffToOn);
    assert!((first.time - 1.7).abs() < 1e-9);
    let pump = trace.events.iter().find(|e| e.junction == "Pump1").unwrap();
    assert!((pump.time - 1.0).abs() < 1e-12);
    let right = trace.events.iter().find(|e| e.junction == "Pipe12R").unwrap();
    assert!((right.time - t2).abs() <= 0.01 + 1e-9);
}

#[test]
fn hybrid_pipeline_agrees_with_oracle() {
    for integrator in [IntegratorKind::Euler, IntegratorKind::Rk4] {
        for p in [
            TankParams::default(),
            TankParams {
                c2: 2.0,
                r12: 0.5,
                qp2: 1.5,
                t20: 0.0,
                ..Default::default()
            },
        ] {
            let cfg = SimConfig {
                integrator,
                ..Default::default()
            };
            let hbg = run(&p, &cfg);
            let (oracle, latches) = oracle_simulate(&p, &cfg).unwrap();
            assert_eq!(hbg.times, oracle.times);
            let diff = hbg
                .probes
                .iter()
                .flatten()
                .zip(oracle.probes.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9, "{integrator} {p:?}: {diff}");
            assert_eq!(hbg.modes, oracle.modes);
            assert_eq!(latches.iter().map(Latch::mode).collect::<Vec<_>>(), hbg.modes);
        }
    }
}

#[test]
fn levels_settle_at_the_balance_point() {
    let p = TankParams::default();
    let trace = run(
        &p,
        &SimConfig {
            t_end: 60.0,
            ..Default::default()
        },
    );
    let expect = steady_state(&p).unwrap();
    for (i, e) in expect.iter().enumerate() {
        let last = *trace.probes[i].last().unwrap();
        assert!((last - e).abs() < 1e-3, "h{} = {last}", i + 1);
    }
}

#[test]
fn every_mode_keeps_integral_causality() {
    let g = build_three_tank(&TankParams::default());
    let report = check_all_modes(&g, 1 << 16).unwrap();
    assert_eq!(report.outcomes.len(), 256);
    assert!(report.mode_invariant_integral);
    assert!(report.orientation_invariant);
}

#[test]
fn junctions_balance_in_every_pass() {
    let d = compile(&build_three_tank(&TankParams::default())).unwrap();
    let mut worst: f64 = 0.0;
    let mut passes = 0;
    simulate_observed(&d, &SimConfig::default(), &mut |o| {
        passes += 1;
        for r in junction_residuals(&d, o.pass, o.mode) {
            worst = worst.max(r.max());
        }
    })
    .unwrap();
    assert!(passes > 4000);
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn pumps_off_means_nothing_moves() {
    let p = TankParams {
        qp1: 0.0,
        qp2: 0.0,
        ..Default::default()
    };
    let trace = run(&p, &SimConfig::default());
    assert!(trace.probes.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn shipped_model_matches_builder() {
    let g = build_three_tank(&TankParams::default());
    let text = serialize_model(&g);
    let shipped = include_str!("../../../models/three_tank.hbg");
    assert_eq!(text, shipped);
    assert_eq!(parse_model(shipped).unwrap(), g);
}
