//! Numerical invariant battery behind `pendulum verify`.

use std::f64::consts::{PI, TAU};

use pendulum_core::connection::{critical_beta, gamma_min, shoot_unstable_manifold, ShootKind, DEFAULT_OFFSET};
use pendulum_core::cycle::{
    displacement, find_limit_cycle_with, iterate_return_map, poincare_map, solve_return_map, verify_no_first_kind_cycle,
    IterationOutcome, ReturnImage,
};
use pendulum_core::integrate::{conservative_energy, integrate_time, EventSet, IntegrationControls};
use pendulum_core::model::{equilibria, separatrix_slopes};
use pendulum_core::{Error, ModelParams, PhaseState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bisection and root tolerance used throughout the battery.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<String, String>;

pub struct Check {
    pub name: &'static str,
    pub summary: &'static str,
    run: fn(&IntegrationControls) -> Outcome,
}

impl std::fmt::Debug for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Check").field("name", &self.name).finish()
    }
}

pub const CHECKS: &[Check] = &[
    Check { name: "equilibria", summary: "saddle slopes solve λ² + γλ − cos φ₀ = 0; no equilibria above β = 1", run: check_equilibria },
    Check { name: "energy", summary: "conservative energy drift and the γ = 0 return map z² = z0² + 4πβ", run: check_energy },
    Check { name: "zero-drive-shot", summary: "at β = 0 the unstable manifold falls onto the axis in [0, π)", run: check_zero_drive_shot },
    Check { name: "phase-integral", summary: "∫z dφ over the cycle equals 2πβ/γ", run: check_phase_integral },
    Check { name: "contraction", summary: "return-map derivative at the cycle equals e^(−γT)", run: check_contraction },
    Check { name: "uniqueness", summary: "two brackets give the same cycle", run: check_uniqueness },
    Check { name: "dichotomy", summary: "a cycle exists iff β > β₀(γ)", run: check_dichotomy },
    Check { name: "plateau", summary: "β₀(γ) = 1 for γ above the onset", run: check_plateau },
    Check { name: "gamma-min", summary: "plateau onset near γ = 1.193", run: check_gamma_min },
    Check { name: "melnikov", summary: "β₀/γ → 4/π as γ → 0", run: check_melnikov },
    Check { name: "monotone", summary: "β₀(γ) is nondecreasing", run: check_monotone },
    Check { name: "first-kind", summary: "orbits around the sink lose energy; divergence is −γ", run: check_first_kind },
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

/// Run the checks whose names are in `only` (all when `None`).
pub fn run_checks(only: Option<&[String]>, controls: &IntegrationControls) -> Vec<CheckResult> {
    CHECKS
        .iter()
        .filter(|c| only.is_none_or(|names| names.iter().any(|n| n == c.name)))
        .map(|c| {
            let (passed, detail) = match (c.run)(controls) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult { name: c.name, passed, detail }
        })
        .collect()
}

fn err(e: Error) -> String {
    e.to_string()
}

fn params(beta: f64, gamma: f64) -> Result<ModelParams, String> {
    ModelParams::new(beta, gamma).map_err(err)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn check_equilibria(_: &IntegrationControls) -> Outcome {
    let mut worst: f64 = 0.0;
    for beta in [0.0, 0.3, 0.7, 0.99] {
        for gamma in [0.2, 1.0, 3.0] {
            let p = params(beta, gamma)?;
            let (l1, l2) = separatrix_slopes(p).map_err(err)?;
            let c = p.phi0().ok_or("missing phi0")?.cos();
            for l in [l1, l2] {
                worst = worst.max((l * l + gamma * l - c).abs());
            }
            ensure(l1 > 0.0 && l2 < 0.0, || format!("slopes {l1}, {l2} at beta {beta}, gamma {gamma}"))?;
            ensure(equilibria(p, -1..=1).len() == 3, || format!("expected 3 equilibria at beta {beta}"))?;
        }
    }
    ensure(equilibria(params(1.2, 1.0)?, -3..=3).is_empty(), || "equilibria found at beta 1.2".into())?;
    ensure(worst < 1e-12, || format!("characteristic residual {worst:e}"))?;
    Ok(format!("max characteristic residual {worst:.2e}"))
}

fn check_energy(controls: &IntegrationControls) -> Outcome {
    let p = params(0.0, 0.0)?;
    let start = PhaseState::new(0.5, 0.3);
    let run = IntegrationControls { max_span: 100.0, ..*controls };
    let seg = integrate_time(start, p, &run, &EventSet::none()).map_err(err)?;
    let e0 = conservative_energy(start);
    let drift = seg.samples.iter().map(|s| (conservative_energy(s.state) - e0).abs()).fold(0.0, f64::max);
    ensure(drift < 1e-8, || format!("energy drift {drift:e} over span 100"))?;
    let mut worst: f64 = 0.0;
    for (beta, z0) in [(0.5, 1.0), (0.2, 2.0), (1.5, 0.5)] {
        let z = match poincare_map(z0, params(beta, 0.0)?, controls).map_err(err)? {
            ReturnImage::Mapped(z) => z,
            ReturnImage::FellToAxis { phi } => return Err(format!("gamma 0 lap fell at {phi}")),
        };
        let exact = (z0 * z0 + 4.0 * PI * beta).sqrt();
        worst = worst.max((z - exact).abs() / exact);
    }
    ensure(worst < 1e-9, || format!("gamma 0 return map relative error {worst:e}"))?;
    Ok(format!("drift {drift:.2e}, return map error {worst:.2e}"))
}

fn check_zero_drive_shot(controls: &IntegrationControls) -> Outcome {
    let mut landings = Vec::new();
    for gamma in [0.1, 0.5, 1.0, 2.0] {
        let shot = shoot_unstable_manifold(params(0.0, gamma)?, DEFAULT_OFFSET, controls).map_err(err)?;
        match shot.kind {
            ShootKind::HitAxis { phi_c } if (0.0..PI).contains(&phi_c) => landings.push(phi_c),
            other => return Err(format!("gamma {gamma}: {other:?}")),
        }
    }
    Ok(format!("phi_c = {landings:.4?}"))
}

/// `n` seeded parameter pairs carrying a running cycle, with `β₀(γ)` when
/// `β ≤ 1`. About a third fall in the bistable window `β₀ < β < 1`.
pub fn cycle_cases(
    seed: u64,
    n: usize,
    gamma_range: (f64, f64),
    beta_max: f64,
    controls: &IntegrationControls,
) -> Result<Vec<(ModelParams, Option<pendulum_core::CriticalResult>)>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let gamma = rng.gen_range(gamma_range.0..gamma_range.1);
        let crit = critical_beta(gamma, TOL, controls)?;
        let lo = crit.beta0 + 0.05;
        let beta = if out.len() % 3 == 0 && lo < 0.95 { rng.gen_range(lo..0.95) } else { rng.gen_range(1.05..beta_max) };
        let critical = (beta <= 1.0).then_some(crit);
        out.push((ModelParams::new(beta, gamma)?, critical));
    }
    Ok(out)
}

fn check_phase_integral(controls: &IntegrationControls) -> Outcome {
    let mut worst: f64 = 0.0;
    for (p, crit) in cycle_cases(2, 6, (0.1, 3.0), 4.0, controls).map_err(err)? {
        let orbit = find_limit_cycle_with(p, crit.as_ref(), TOL, controls).map_err(err)?;
        let expected = TAU * p.beta / p.gamma;
        worst = worst.max((orbit.phase_integral - expected).abs() / expected);
    }
    ensure(worst <= 1e-6, || format!("relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn check_contraction(controls: &IntegrationControls) -> Outcome {
    let mut worst: f64 = 0.0;
    for (p, crit) in cycle_cases(3, 4, (0.2, 1.0), 3.0, controls).map_err(err)? {
        let orbit = find_limit_cycle_with(p, crit.as_ref(), TOL, controls).map_err(err)?;
        worst = worst.max((orbit.contraction - orbit.contraction_expected).abs() / orbit.contraction_expected);
    }
    ensure(worst <= 1e-4, || format!("relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

/// Fixed point from a bracket unrelated to the one the library picks:
/// below the cycle near the axis, above it past line L.
pub fn alternative_fixed_point(p: ModelParams, tol: f64, controls: &IntegrationControls) -> Result<f64, Error> {
    let lo = if p.beta > 1.0 { 0.1 * (p.beta - 1.0) / p.gamma } else { 1e-3 };
    let hi = 3.0 * p.line_l();
    let d = (displacement(lo, p, controls)?, displacement(hi, p, controls)?);
    solve_return_map((lo, hi), d, p, tol, controls).map(|(z, _)| z)
}

fn check_uniqueness(controls: &IntegrationControls) -> Outcome {
    let mut worst: f64 = 0.0;
    for (p, crit) in cycle_cases(4, 4, (0.2, 2.0), 3.0, controls).map_err(err)? {
        let a = find_limit_cycle_with(p, crit.as_ref(), TOL, controls).map_err(err)?.z_start;
        let b = alternative_fixed_point(p, TOL, controls).map_err(err)?;
        worst = worst.max((a - b).abs());
    }
    ensure(worst <= 10.0 * TOL, || format!("fixed points differ by {worst:e}"))?;
    Ok(format!("max difference {worst:.2e}"))
}

/// Cycle existence by plain iteration of the return map from line L.
pub fn iterated_cycle_exists(p: ModelParams, controls: &IntegrationControls) -> Result<bool, Error> {
    match iterate_return_map(p.line_l(), p, 1e-8, 20_000, controls)? {
        IterationOutcome::Converged { .. } => Ok(true),
        IterationOutcome::FellToAxis { .. } => Ok(false),
        IterationOutcome::NotConverged { .. } => Err(Error::Numerical("return-map iteration did not settle")),
    }
}

fn check_dichotomy(controls: &IntegrationControls) -> Outcome {
    let mut checked = 0;
    for gamma in [0.2, 0.6, 1.0, 1.6] {
        let b0 = critical_beta(gamma, TOL, controls).map_err(err)?.beta0;
        for beta in [0.15, 0.45, 0.8, 1.3] {
            if (beta - b0).abs() < TOL || beta == 1.0 {
                continue;
            }
            let exists = iterated_cycle_exists(params(beta, gamma)?, controls).map_err(err)?;
            ensure(exists == (beta > b0), || format!("gamma {gamma}, beta {beta}: cycle {exists}, beta0 {b0}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} grid points agree"))
}

fn check_plateau(controls: &IntegrationControls) -> Outcome {
    for gamma in [1.25, 2.0, 5.0] {
        let b0 = critical_beta(gamma, 1e-6, controls).map_err(err)?.beta0;
        ensure((b0 - 1.0).abs() <= 1e-3, || format!("gamma {gamma}: beta0 {b0}"))?;
    }
    Ok("beta0 = 1 at gamma 1.25, 2, 5".into())
}

fn check_gamma_min(controls: &IntegrationControls) -> Outcome {
    let g = gamma_min(1e-4, controls).map_err(err)?;
    ensure((g - 1.193).abs() <= 5e-3, || format!("onset at {g}"))?;
    Ok(format!("onset at gamma {g:.5}"))
}

fn check_melnikov(controls: &IntegrationControls) -> Outcome {
    let gamma = 0.01;
    let ratio = critical_beta(gamma, 1e-8, controls).map_err(err)?.beta0 / gamma / (4.0 / PI);
    ensure((ratio - 1.0).abs() <= 0.02, || format!("beta0/gamma is {ratio} of 4/pi"))?;
    Ok(format!("beta0/gamma = {ratio:.5} x 4/pi"))
}

fn check_monotone(controls: &IntegrationControls) -> Outcome {
    let mut prev = 0.0;
    for i in 0..=12 {
        let gamma = 0.1 + 0.1 * i as f64;
        let b0 = critical_beta(gamma, 1e-7, controls).map_err(err)?.beta0;
        ensure(b0 >= prev - 1e-7, || format!("beta0 drops to {b0} at gamma {gamma}"))?;
        prev = b0;
    }
    Ok("beta0 nondecreasing on gamma 0.1..1.3".into())
}

fn check_first_kind(controls: &IntegrationControls) -> Outcome {
    for (beta, gamma) in [(0.0, 0.1), (0.5, 1.0), (0.9, 0.3), (0.3, 3.0)] {
        let report = verify_no_first_kind_cycle(params(beta, gamma)?, controls).map_err(err)?;
        ensure(report.passed, || format!("beta {beta}, gamma {gamma}: energy rose or oscillation grew"))?;
        ensure(report.divergence == -gamma, || format!("divergence {}", report.divergence))?;
    }
    Ok("energy decays around the sink in all cases".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names = check_names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
    }

    #[test]
    fn filter_selects_by_name() {
        let only = vec!["equilibria".to_string()];
        let r = run_checks(Some(&only), &IntegrationControls::default());
        assert_eq!(r.len(), 1);
        assert!(r[0].passed, "{}", r[0].detail);
    }
}
