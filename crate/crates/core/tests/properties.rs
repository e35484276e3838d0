use std::f64::consts::TAU;

use pendulum_core::connection::{critical_beta, is_subcritical, shoot_unstable_manifold, ShootKind};
use pendulum_core::cycle::{poincare_map, section_phi, ReturnImage};
use pendulum_core::{integrate_time, EventSet, IntegrationControls, ModelParams, PhaseState, TerminalEvent};

fn controls() -> IntegrationControls {
    IntegrationControls::default()
}

#[test]
fn critical_value_is_nondecreasing_in_damping() {
    let mut prev = 0.0;
    for i in 0..=24 {
        let gamma = 0.1 + 0.05 * i as f64;
        let b0 = critical_beta(gamma, 1e-8, &controls()).unwrap().beta0;
        assert!(b0 >= prev - 1e-8, "beta0 {b0} at gamma {gamma} after {prev}");
        assert!(b0 <= 1.0);
        prev = b0;
    }
}

#[test]
fn classification_flips_once_along_beta() {
    for gamma in [0.3, 0.8, 1.1] {
        let flags: Vec<bool> = (0..20).map(|i| is_subcritical(0.05 * i as f64, gamma, &controls()).unwrap()).collect();
        let flips = flags.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(flags[0], "beta 0 must be subcritical at gamma {gamma}");
        assert!(flips <= 1, "gamma {gamma}: {flags:?}");
    }
}

#[test]
fn shot_outcome_is_robust_to_the_offset() {
    for (beta, gamma) in [(0.1, 0.5), (0.8, 0.5), (0.2, 1.0), (0.99, 1.0), (0.6, 0.2)] {
        let p = ModelParams::new(beta, gamma).unwrap();
        let kinds: Vec<ShootKind> =
            [1e-6, 1e-7, 1e-8].iter().map(|&o| shoot_unstable_manifold(p, o, &controls()).unwrap().kind).collect();
        for k in &kinds[1..] {
            match (kinds[0], *k) {
                (ShootKind::HitAxis { phi_c: a }, ShootKind::HitAxis { phi_c: b }) => assert!((a - b).abs() < 1e-4),
                (ShootKind::HitLineK1 { z_c: a }, ShootKind::HitLineK1 { z_c: b }) => assert!((a - b).abs() < 1e-4),
                (a, b) => panic!("offset changed the outcome at ({beta}, {gamma}): {a:?} vs {b:?}"),
            }
        }
    }
}

#[test]
fn critical_value_is_stable_under_tighter_tolerances() {
    for gamma in [0.05, 0.4, 1.0] {
        let coarse = critical_beta(gamma, 1e-9, &controls()).unwrap().beta0;
        let fine = critical_beta(gamma, 1e-9, &controls().scaled(0.5)).unwrap().beta0;
        assert!((coarse - fine).abs() < 1e-7, "gamma {gamma}: {coarse} vs {fine}");
    }
}

#[test]
fn graph_form_agrees_with_time_integration() {
    for (beta, gamma, z0) in [(1.5, 0.5, 2.0), (0.7, 0.3, 2.5), (2.0, 2.0, 0.4), (0.5, 0.0, 1.0)] {
        let p = ModelParams::new(beta, gamma).unwrap();
        let ReturnImage::Mapped(z_graph) = poincare_map(z0, p, &controls()).unwrap() else { panic!() };
        let a = section_phi(p);
        let events = EventSet::none().with_vertical_line(a + TAU);
        let seg = integrate_time(PhaseState::new(a, z0), p, &controls(), &events).unwrap();
        let TerminalEvent::VerticalLineCrossing { z } = seg.terminal_event else { panic!("{:?}", seg.terminal_event) };
        assert!((z - z_graph).abs() < 1e-8 * z.max(1.0), "({beta}, {gamma}): {z} vs {z_graph}");
    }
}

#[test]
fn trichotomy_on_a_grid() {
    let tol = 1e-7;
    let mut below = 0;
    let mut above = 0;
    for i in 0..20 {
        let gamma = 0.1 + 0.1 * i as f64;
        let b0 = critical_beta(gamma, tol, &controls()).unwrap().beta0;
        for j in 0..20 {
            let beta = 0.025 + 0.05 * j as f64;
            if (beta - b0).abs() < tol {
                continue;
            }
            let p = ModelParams::new(beta, gamma).unwrap();
            let kind = shoot_unstable_manifold(p, 1e-7, &controls()).unwrap().kind;
            if beta < b0 {
                below += 1;
                assert!(matches!(kind, ShootKind::HitAxis { .. }), "({beta}, {gamma}) below {b0}: {kind:?}");
            } else {
                above += 1;
                assert!(matches!(kind, ShootKind::HitLineK1 { .. }), "({beta}, {gamma}) above {b0}: {kind:?}");
            }
        }
    }
    assert!(below > 50 && above > 50);
}
