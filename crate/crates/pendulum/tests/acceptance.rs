//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use pendulum_core::connection::{critical_beta, shoot_unstable_manifold, ShootKind, DEFAULT_OFFSET};
use pendulum_core::cycle::{
    displacement, find_limit_cycle, find_limit_cycle_with, iterate_return_map, poincare_map, solve_return_map,
    IterationOutcome, ReturnImage,
};
use pendulum_core::integrate::conservative_energy;
use pendulum_core::{integrate_time, CriticalResult, EventSet, IntegrationControls, ModelParams, PhaseState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn controls() -> IntegrationControls {
    IntegrationControls::default()
}

fn pendulum(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pendulum"))
        .args(args)
        .env_remove("PENDULUM_REL_TOL")
        .env_remove("PENDULUM_ABS_TOL")
        .env_remove("PENDULUM_EVENT_TOL")
        .env_remove("PENDULUM_WORKERS")
        .output()
        .expect("binary runs")
}

fn fail<T>(msg: impl Into<String>) -> Result<T, String> {
    Err(msg.into())
}

/// Random `(γ, β)` with a running cycle; every third case sits in the
/// bistable window `β₀ < β < 1` when that window is wide enough.
fn cycle_cases(seed: u64, n: usize, gamma: (f64, f64), beta_max: f64) -> Vec<(ModelParams, Option<CriticalResult>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let g = rng.gen_range(gamma.0..gamma.1);
        let crit = critical_beta(g, 1e-10, &controls()).expect("critical value");
        let lo = crit.beta0 + 0.03;
        let beta = if out.len() % 3 == 0 && lo < 0.97 { rng.gen_range(lo..0.97) } else { rng.gen_range(1.02..beta_max) };
        out.push((ModelParams::new(beta, g).unwrap(), (beta <= 1.0).then_some(crit)));
    }
    out
}

fn c1_plateau_onset() -> Outcome {
    let start = Instant::now();
    let o = pendulum(&["critical", "--gamma", "1.193"]);
    let elapsed = start.elapsed();
    if o.status.code() != Some(0) {
        return fail(format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
    }
    let text = String::from_utf8(o.stdout).unwrap();
    let row = text.lines().nth(1).ok_or("no data row")?;
    let beta0: f64 = row.split(',').nth(1).ok_or("no beta0 column")?.parse().map_err(|_| "beta0 not a number")?;
    if (beta0 - 1.0).abs() > 5e-3 || elapsed > Duration::from_secs(30) {
        return fail(format!("beta0 {beta0} in {elapsed:?}"));
    }
    Ok(format!("beta0 = {beta0} in {:.3} s", elapsed.as_secs_f64()))
}

fn c2_overdamped_plateau() -> Outcome {
    let mut parts = Vec::new();
    for gamma in [1.25, 1.5, 2.0, 5.0, 10.0] {
        let start = Instant::now();
        let b0 = critical_beta(gamma, 1e-6, &controls()).map_err(|e| e.to_string())?.beta0;
        let t = start.elapsed();
        if (b0 - 1.0).abs() > 1e-3 || t > Duration::from_secs(30) {
            return fail(format!("gamma {gamma}: beta0 {b0} in {t:?}"));
        }
        parts.push(format!("{gamma}: {b0} ({:.2} s)", t.as_secs_f64()));
    }
    Ok(parts.join(", "))
}

fn c3_melnikov_limit() -> Outcome {
    let gamma = 0.01;
    let b0 = critical_beta(gamma, 1e-9, &controls()).map_err(|e| e.to_string())?.beta0;
    let ratio = b0 / gamma;
    let target = 4.0 / PI;
    if !(target * 0.98..=target * 1.02).contains(&ratio) {
        return fail(format!("beta0/gamma = {ratio}, 4/pi = {target}"));
    }
    Ok(format!("beta0/gamma = {ratio:.6}, 4/pi = {target:.6}"))
}

fn c4_phase_integral() -> Outcome {
    let mut worst: f64 = 0.0;
    let cases = cycle_cases(11, 20, (0.05, 3.0), 5.0);
    let bistable = cases.iter().filter(|(p, _)| p.beta < 1.0).count();
    for (p, crit) in &cases {
        let orbit = find_limit_cycle_with(*p, crit.as_ref(), 1e-10, &controls()).map_err(|e| format!("{p:?}: {e}"))?;
        let expected = TAU * p.beta / p.gamma;
        let rel = (orbit.phase_integral - expected).abs() / expected;
        if rel > 1e-6 {
            return fail(format!("{p:?}: relative error {rel:e}"));
        }
        worst = worst.max(rel);
    }
    Ok(format!("20 cases ({bistable} bistable), max relative error {worst:.2e}"))
}

fn c5_contraction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    while used < 10 {
        let gamma = rng.gen_range(0.1..1.0);
        let beta = rng.gen_range(1.2..4.0);
        let p = ModelParams::new(beta, gamma).unwrap();
        let orbit = find_limit_cycle(p, 1e-10, &controls()).map_err(|e| format!("{p:?}: {e}"))?;
        // Below ~1e-3 the difference quotient is dominated by rounding.
        if orbit.contraction_expected < 1e-3 {
            skipped += 1;
            continue;
        }
        let rel = (orbit.contraction - orbit.contraction_expected).abs() / orbit.contraction_expected;
        if rel > 1e-4 {
            return fail(format!("{p:?}: {} vs {}", orbit.contraction, orbit.contraction_expected));
        }
        worst = worst.max(rel);
        used += 1;
    }
    Ok(format!("10 cases ({skipped} resampled), max relative error {worst:.2e}"))
}

fn c6_dichotomy() -> Outcome {
    let tol = 1e-6;
    let mut with_cycle = 0;
    let mut checked = 0;
    for i in 0..10 {
        let gamma = 0.2 * (i + 1) as f64;
        let b0 = critical_beta(gamma, tol, &controls()).map_err(|e| e.to_string())?.beta0;
        for j in 0..10 {
            let beta = 0.15 * (j + 1) as f64;
            if (beta - b0).abs() <= tol {
                continue;
            }
            let p = ModelParams::new(beta, gamma).unwrap();
            // Plain iteration from line L, independent of the bisection.
            let exists = match iterate_return_map(p.line_l(), p, 1e-9, 50_000, &controls()).map_err(|e| e.to_string())? {
                IterationOutcome::Converged { .. } => true,
                IterationOutcome::FellToAxis { .. } => false,
                IterationOutcome::NotConverged { z } => return fail(format!("{p:?}: iteration stuck at {z}")),
            };
            if exists != (beta > b0) {
                return fail(format!("gamma {gamma}, beta {beta}: cycle {exists}, beta0 {b0}"));
            }
            checked += 1;
            with_cycle += exists as usize;
        }
    }
    Ok(format!("{checked} points agree ({with_cycle} with a cycle)"))
}

fn c7_zero_drive_shot() -> Outcome {
    let mut landings = Vec::new();
    for gamma in [0.1, 0.5, 1.0, 2.0] {
        let p = ModelParams::new(0.0, gamma).unwrap();
        match shoot_unstable_manifold(p, DEFAULT_OFFSET, &controls()).map_err(|e| e.to_string())?.kind {
            ShootKind::HitAxis { phi_c } if (0.0..PI).contains(&phi_c) => landings.push(format!("{phi_c:.6}")),
            other => return fail(format!("gamma {gamma}: {other:?}")),
        }
    }
    Ok(format!("phi_c = [{}]", landings.join(", ")))
}

fn c8_conservative() -> Outcome {
    let p = ModelParams::new(0.0, 0.0).unwrap();
    let mut drift: f64 = 0.0;
    for start in [PhaseState::new(0.5, 0.3), PhaseState::new(-1.0, 1.5), PhaseState::new(0.0, 2.5)] {
        let c = IntegrationControls { max_span: 100.0, ..controls() };
        let seg = integrate_time(start, p, &c, &EventSet::none()).map_err(|e| e.to_string())?;
        let e0 = conservative_energy(start);
        drift = seg.samples.iter().map(|s| (conservative_energy(s.state) - e0).abs()).fold(drift, f64::max);
    }
    if drift >= 1e-8 {
        return fail(format!("energy drift {drift:e}"));
    }
    let mut worst: f64 = 0.0;
    for (beta, z0) in [(0.5, 1.0), (0.1, 3.0), (1.0, 0.2), (2.5, 1.7)] {
        let p = ModelParams::new(beta, 0.0).unwrap();
        let z = match poincare_map(z0, p, &controls()).map_err(|e| e.to_string())? {
            ReturnImage::Mapped(z) => z,
            ReturnImage::FellToAxis { phi } => return fail(format!("lap from {z0} fell at {phi}")),
        };
        let exact = (z0 * z0 + 4.0 * PI * beta).sqrt();
        worst = worst.max((z - exact).abs() / exact);
    }
    if worst > 1e-9 {
        return fail(format!("return map relative error {worst:e}"));
    }
    Ok(format!("drift {drift:.2e}, return map error {worst:.2e}"))
}

fn c9_uniqueness() -> Outcome {
    let tol = 1e-10;
    let mut worst: f64 = 0.0;
    for (p, crit) in cycle_cases(9, 10, (0.1, 2.5), 4.0) {
        let a = find_limit_cycle_with(p, crit.as_ref(), tol, &controls()).map_err(|e| format!("{p:?}: {e}"))?.z_start;
        // Second bracket: just above the axis (or inside the strip where
        // every slope is positive) up to three times the height of line L.
        let lo = if p.beta > 1.0 { 0.1 * (p.beta - 1.0) / p.gamma } else { 1e-3 };
        let hi = 3.0 * p.line_l();
        let d = (
            displacement(lo, p, &controls()).map_err(|e| e.to_string())?,
            displacement(hi, p, &controls()).map_err(|e| e.to_string())?,
        );
        let (b, _) = solve_return_map((lo, hi), d, p, tol, &controls()).map_err(|e| format!("{p:?}: {e}"))?;
        if (a - b).abs() > 10.0 * tol {
            return fail(format!("{p:?}: {a} vs {b}"));
        }
        worst = worst.max((a - b).abs());
    }
    Ok(format!("10 cases, max difference {worst:.2e}"))
}

fn c10_determinism() -> Outcome {
    let sweeps: [&[&str]; 2] = [
        &["sweep", "velocity", "--gamma", "0.5", "--beta", "0:2:0.05"],
        &["sweep", "critical", "--gamma", "0.05:2:0.05"],
    ];
    for args in sweeps {
        let mut outputs = Vec::new();
        for w in ["1", "4", "8"] {
            let o = pendulum(&[args, &["--workers", w]].concat());
            if o.status.code() != Some(0) {
                return fail(format!("{args:?} with {w} workers: exit {:?}", o.status.code()));
            }
            outputs.push(o.stdout);
        }
        if outputs.iter().any(|o| *o != outputs[0]) {
            return fail(format!("{args:?}: outputs differ across worker counts"));
        }
    }
    Ok("velocity and critical sweeps byte-identical for 1, 4, 8 workers".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 plateau onset at gamma 1.193 via CLI", c1_plateau_onset),
        ("2 overdamped plateau beta0 = 1", c2_overdamped_plateau),
        ("3 small-damping limit beta0/gamma -> 4/pi", c3_melnikov_limit),
        ("4 phase integral equals 2 pi beta / gamma", c4_phase_integral),
        ("5 return-map derivative equals exp(-gamma T)", c5_contraction),
        ("6 cycle exists iff beta > beta0 on 10x10 grid", c6_dichotomy),
        ("7 unstable manifold at beta 0 lands in [0, pi)", c7_zero_drive_shot),
        ("8 conservative energy and gamma 0 return map", c8_conservative),
        ("9 two brackets give the same cycle", c9_uniqueness),
        ("10 sweep output independent of worker count", c10_determinism),
    ];
    let mut failed = 0;
    let total_start = Instant::now();
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    println!(
        "acceptance: {} of 10 criteria passed in {:.1} s",
        10 - failed,
        total_start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
