mod common;

use common::defaults;
use distill_core::column::{
    init_steady_state, simulate, step, ColumnConfig, PerturbationEvent, PerturbationSchedule, SimError, TrayState,
};
use distill_core::thermo::BinarySystem;

fn setup() -> (ColumnConfig, BinarySystem, TrayState) {
    let d = defaults();
    let s = init_steady_state(&d.column, &d.system).unwrap();
    (d.column, d.system, s)
}

#[test]
fn steady_state_closes_balances() {
    let (cfg, _, s) = setup();
    let f = &s.flows;
    assert!(s.total_net_inflow().abs() / f.feed < 1e-6, "{}", s.total_net_inflow());
    assert!(s.heavy_net_inflow().abs() / (f.feed * cfg.feed_z[0]) < 1e-6, "{}", s.heavy_net_inflow());
}

#[test]
fn equimolar_feed_separates_in_the_right_direction() {
    let (cfg, _, s) = setup();
    assert_eq!(cfg.feed_z, [0.5, 0.5]);
    assert!(s.reboiler.x_heavy > 0.5 && s.condenser.x_heavy < 0.5);
}

fn assert_monotone(s: &TrayState, tol: f64) {
    let mut prev = s.condenser.x_heavy;
    for t in &s.trays {
        assert!(t.x_heavy >= prev - tol, "{} after {prev}", t.x_heavy);
        prev = t.x_heavy;
    }
    assert!(s.reboiler.x_heavy >= prev - tol);
}

#[test]
fn uniform_pressure_profile_is_monotone() {
    let d = defaults();
    let mut cfg = d.column.clone();
    cfg.n_trays = 5;
    cfg.feed_tray = 3;
    cfg.pressures.top = 104.0;
    cfg.pressures.main = 104.0 + 1e-6;
    cfg.pressures.bottom = 104.0 + 2e-6;
    let s = init_steady_state(&cfg, &d.system).unwrap();
    assert_monotone(&s, 0.0);
}

#[test]
fn default_profile_is_monotone_up_to_the_pinch() {
    // At R = 0.55 the rectifying section pinches; the pressure rise between
    // pinched trays shifts the pinch by a few 1e-4.
    let (_, _, s) = setup();
    assert_monotone(&s, 5e-4);
}

#[test]
fn steady_rectifying_trays_lie_on_the_operating_line() {
    let (_, _, s) = setup();
    let f = &s.flows;
    let xd = s.condenser.x_heavy;
    // V y_1 = (L + D) x_D and V y_{n+1} = L x_n + D x_D above the feed
    assert!((f.vapor * s.trays[0].y_heavy - (f.reflux + f.distillate) * xd).abs() < 1e-6);
    for n in 0..s.feed_tray - 1 {
        let lhs = f.vapor * s.trays[n + 1].y_heavy;
        let rhs = f.reflux * s.trays[n].x_heavy + f.distillate * xd;
        assert!((lhs - rhs).abs() < 1e-6, "tray {}: {lhs} vs {rhs}", n + 1);
    }
}

#[test]
fn steady_state_is_a_fixed_point() {
    let (cfg, sys, s) = setup();
    let next = step(&s, &s.inputs, cfg.dt, &sys).unwrap();
    for (a, b) in s.trays.iter().zip(&next.trays) {
        assert!((a.x_heavy - b.x_heavy).abs() < 1e-8);
        assert!((a.t - b.t).abs() < 1e-8);
    }
    assert!((s.reboiler.m - next.reboiler.m).abs() < 1e-8);
    assert!((s.condenser.x_heavy - next.condenser.x_heavy).abs() < 1e-8);
}

/// Every tray, the drums and the vapor stay proper binary fractions.
fn check_closure(s: &TrayState) {
    for t in &s.trays {
        assert!((t.x_heavy + t.x_light() - 1.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&t.x_heavy) && (0.0..=1.0).contains(&t.y_heavy));
    }
    assert!((0.0..=1.0).contains(&s.condenser.x_heavy) && (0.0..=1.0).contains(&s.reboiler.x_heavy));
}

#[test]
fn default_schedule_conserves_mass_at_every_step() {
    let d = defaults();
    let s0 = init_steady_state(&d.column, &d.system).unwrap();
    let mut s = s0.clone();
    let h = d.column.dt / 3600.0;
    let mut worst = 0.0f64;
    let steps = (d.generation.duration_s / d.column.dt) as usize;
    for k in 0..steps {
        let u = d.schedule.inputs_at(k as f64 * d.column.dt, &d.column);
        let next = step(&s, &u, d.column.dt, &d.system).unwrap();
        // Euler update of inventories equals the net external flow over the step
        // (flows of the state the step started from, after the input change).
        let mut probe = s.clone();
        if probe.inputs != u {
            probe = step(&s, &u, 0.0, &d.system).unwrap();
        }
        let dh = next.heavy_inventory() - s.heavy_inventory();
        let dm = next.total_inventory() - s.total_inventory();
        let scale = probe.flows.feed * h;
        worst = worst.max((dh - h * probe.heavy_net_inflow()).abs() / scale);
        worst = worst.max((dm - h * probe.total_net_inflow()).abs() / scale);
        check_closure(&next);
        s = next;
    }
    assert!(worst < 1e-6, "worst relative inventory mismatch {worst}");
}

#[test]
fn feed_enrichment_raises_reboiler_purity() {
    let (cfg, sys, s0) = setup();
    let mut u = s0.inputs;
    u.feed_z_heavy = 0.6;
    let mut s = s0.clone();
    let mut prev = s.reboiler.x_heavy;
    // the reboiler sits near pure heavy; compare the bottom tray as well
    let mut prev_tray = s.trays.last().unwrap().x_heavy;
    for _ in 0..100 {
        s = step(&s, &u, cfg.dt, &sys).unwrap();
        assert!(s.reboiler.x_heavy >= prev - 1e-15);
        assert!(s.trays.last().unwrap().x_heavy >= prev_tray - 1e-15);
        prev = s.reboiler.x_heavy;
        prev_tray = s.trays.last().unwrap().x_heavy;
    }
    assert!(prev_tray > s0.trays.last().unwrap().x_heavy);
}

#[test]
fn halving_dt_barely_moves_the_endpoint() {
    let d = defaults();
    let s0 = init_steady_state(&d.column, &d.system).unwrap();
    let schedule = PerturbationSchedule {
        events: vec![
            PerturbationEvent::FeedFlowStep { t: 0.0, value: 49.45 },
            PerturbationEvent::FeedCompStep { t: 600.0, z_heavy: 0.55 },
            PerturbationEvent::RefluxRamp {
                start: 0.0,
                end: 3600.0,
                from: 0.55,
                to: 0.75,
            },
        ],
    };
    let run = |dt: f64| {
        let mut cfg = d.column.clone();
        cfg.dt = dt;
        simulate(&s0, &cfg, &schedule, &d.system, 3600.0, 30.0, |_| {}).unwrap()
    };
    let a = run(d.column.dt);
    let b = run(d.column.dt / 2.0);
    let mut worst = (a.condenser.x_heavy - b.condenser.x_heavy).abs();
    worst = worst.max((a.reboiler.x_heavy - b.reboiler.x_heavy).abs());
    for (ta, tb) in a.trays.iter().zip(&b.trays) {
        worst = worst.max((ta.x_heavy - tb.x_heavy).abs());
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn schedule_applies_events_in_onset_order() {
    let d = defaults();
    let u = d.schedule.inputs_at(0.0, &d.column);
    assert_eq!(u.reflux_ratio, 0.55);
    assert_eq!(u.feed_flow, d.column.feed_flow);
    let u = d.schedule.inputs_at(28800.0, &d.column);
    assert!((u.reflux_ratio - 1.05).abs() < 1e-12);
    assert_eq!(u.feed_flow, 36.55);
    assert_eq!(u.feed_z_heavy, 0.45);
    assert_eq!(u.pressures.top, 103.0);
    let u = d.schedule.inputs_at(15000.0, &d.column);
    assert_eq!((u.feed_flow, u.feed_z_heavy), (49.45, 0.55));
}

#[test]
fn invalid_inputs_are_rejected() {
    let d = defaults();
    let mut cfg = d.column.clone();
    cfg.feed_tray = cfg.n_trays + 1;
    assert!(matches!(init_steady_state(&cfg, &d.system), Err(SimError::Config(_))));
    let bad = PerturbationSchedule {
        events: vec![PerturbationEvent::FeedFlowStep { t: 1e9, value: 40.0 }],
    };
    assert!(matches!(bad.validate(28800.0), Err(SimError::Schedule(_))));
}

#[test]
fn runaway_step_reports_instability() {
    let (cfg, sys, s) = setup();
    let mut u = s.inputs;
    u.feed_z_heavy = 0.9;
    let r = step(&s, &u, 1e4 * cfg.dt, &sys);
    assert!(matches!(r, Err(SimError::Instability { .. }) | Err(SimError::NegativeFlow { .. })), "{r:?}");
}
