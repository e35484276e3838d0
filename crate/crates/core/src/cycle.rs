//! Return map on a section of the cylinder and the running limit cycle.
//!
//! The section is the vertical line through the saddle `A₀`,
//! `φ_s = −π − φ₀` (or `φ_s = 0` when `β > 1` and there are no saddles).
//! A point `(φ_s, z₀)` with `z₀ > 0` is carried by the graph form
//! `dz/dφ = (β − sin φ)/z − γ` across one turn to `(φ_s + 2π, P(z₀))`.
//! Along any lap `P'(z₀) = exp(−γ ∫dφ/z)`, so at a fixed point the map
//! contracts by `e^{−γT}` with `T` the period of the cycle.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use libm::{exp, fabs, fmax, fmin};

use crate::connection::{self, shoot_unstable_manifold, CriticalResult, ShootKind, DEFAULT_OFFSET};
use crate::error::{Error, Result};
use crate::integrate::{graph_run, integrate_time_span, Capture, EventSet, GraphRun, IntegrationControls, TerminalEvent};
use crate::model::{self, FixedPointKind, ModelParams, PhaseState};
use crate::rk::{self, Settings};

/// Default number of φ-samples stored on a [`PeriodicOrbit`].
pub const DEFAULT_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnImage {
    Mapped(f64),
    /// The orbit reached the Φ-axis at `phi` before completing the turn.
    FellToAxis { phi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub params: ModelParams,
    pub section_phi: f64,
    /// Fixed point of the return map on the section.
    pub z_start: f64,
    /// `z_T(φ)` at `φ_s + 2πi/n`, `i = 0..n`.
    pub samples: Vec<PhaseState>,
    /// Time to cover one turn, `∫dφ/z`.
    pub period: f64,
    /// `2π / period`.
    pub mean_velocity: f64,
    /// `∫z dφ` over one turn; equals `2πβ/γ` on a cycle.
    pub phase_integral: f64,
    /// Central finite-difference derivative of the return map at `z_start`.
    pub contraction: f64,
    /// `e^{−γ·period}`.
    pub contraction_expected: f64,
    pub min_z: f64,
    /// `|P(z_start) − z_start|`.
    pub residual: f64,
    /// Return-map evaluations spent in the root search.
    pub evaluations: u32,
    /// Saddle-connection value the existence gate compared against, when `β ≤ 1`.
    pub beta0: Option<f64>,
}

/// Section through `A₀`: `−π − φ₀`, or 0 without equilibria.
pub fn section_phi(params: ModelParams) -> f64 {
    match params.phi0() {
        Some(phi0) => -PI - phi0,
        None => 0.0,
    }
}

fn lap(z0: f64, params: ModelParams, controls: &IntegrationControls, record: bool) -> Result<GraphRun> {
    let a = section_phi(params);
    graph_run(z0, (a, a + TAU), params, controls, record)
}

/// One turn of the return map from `(φ_s, z0)`.
pub fn poincare_map(z0: f64, params: ModelParams, controls: &IntegrationControls) -> Result<ReturnImage> {
    if !(z0 > 0.0) {
        return Err(Error::Domain("return map needs z0 > 0"));
    }
    let run = lap(z0, params, controls, false)?;
    Ok(image_of(&run))
}

fn image_of(run: &GraphRun) -> ReturnImage {
    if run.fell {
        let phi = match run.segment.terminal_event {
            TerminalEvent::AxisCrossing { phi } => phi,
            _ => run.segment.end_state().phi,
        };
        ReturnImage::FellToAxis { phi }
    } else {
        ReturnImage::Mapped(run.z_end)
    }
}

/// `P(z) − z`, failing if the orbit falls onto the axis.
pub fn displacement(z: f64, params: ModelParams, controls: &IntegrationControls) -> Result<f64> {
    match poincare_map(z, params, controls)? {
        ReturnImage::Mapped(p) => Ok(p - z),
        ReturnImage::FellToAxis { .. } => Err(Error::Numerical("return map left the upper half-plane inside the bracket")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationOutcome {
    Converged { z: f64, iterations: u32 },
    FellToAxis { laps: u32, phi: f64 },
    NotConverged { z: f64 },
}

/// Plain iteration `z ← P(z)` from `z0`.
///
/// Convergence is declared once the geometric tail estimate
/// `|Δₙ| / (1 − ρ)`, with `ρ = |Δₙ/Δₙ₋₁|`, drops below `tol`.
pub fn iterate_return_map(
    z0: f64,
    params: ModelParams,
    tol: f64,
    max_laps: u32,
    controls: &IntegrationControls,
) -> Result<IterationOutcome> {
    let mut z = z0;
    let mut prev_step: Option<f64> = None;
    for laps in 1..=max_laps {
        let next = match poincare_map(z, params, controls)? {
            ReturnImage::Mapped(next) => next,
            ReturnImage::FellToAxis { phi } => return Ok(IterationOutcome::FellToAxis { laps, phi }),
        };
        let step = next - z;
        z = next;
        if step == 0.0 {
            return Ok(IterationOutcome::Converged { z, iterations: laps });
        }
        if let Some(prev) = prev_step {
            let rho = fabs(step / prev);
            if rho < 1.0 && fabs(step) / (1.0 - rho) <= tol {
                return Ok(IterationOutcome::Converged { z, iterations: laps });
            }
        }
        prev_step = Some(step);
    }
    Ok(IterationOutcome::NotConverged { z })
}

/// Root of `P(z) − z` in `(lo, hi)` by Illinois regula falsi, given the
/// displacements at the ends (`d_lo > 0 ≥ d_hi`).
pub fn solve_return_map(
    bracket: (f64, f64),
    displacements: (f64, f64),
    params: ModelParams,
    tol: f64,
    controls: &IntegrationControls,
) -> Result<(f64, u32)> {
    let (mut lo, mut hi) = bracket;
    let (mut d_lo, mut d_hi) = displacements;
    if !(d_lo > 0.0 && d_hi <= 0.0 && lo < hi) {
        return Err(Error::Numerical("return-map bracket does not enclose a sign change"));
    }
    if d_hi == 0.0 {
        return Ok((hi, 0));
    }
    let mut evaluations = 0;
    let mut side = 0i8;
    let mut best = (hi, fabs(d_hi));
    while evaluations < 400 {
        let mut z = hi - d_hi * (hi - lo) / (d_hi - d_lo);
        if !(z > lo && z < hi) {
            z = 0.5 * (lo + hi);
        }
        let d = displacement(z, params, controls)?;
        evaluations += 1;
        if fabs(d) < best.1 {
            best = (z, fabs(d));
        }
        if d == 0.0 || fabs(d) <= 1e-15 * fmax(z, 1.0) {
            return Ok((z, evaluations));
        }
        if d > 0.0 {
            lo = z;
            d_lo = d;
            if side == 1 {
                d_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = z;
            d_hi = d;
            if side == -1 {
                d_lo *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= tol {
            return Ok((best.0, evaluations));
        }
    }
    Err(Error::Numerical("return-map root search did not converge"))
}

/// Locate the running cycle for `params`, computing `β₀(γ)` first when
/// `β ≤ 1`.
///
/// `tol` is both the β-resolution of that bisection and the z-resolution
/// of the fixed point.
pub fn find_limit_cycle(params: ModelParams, tol: f64, controls: &IntegrationControls) -> Result<PeriodicOrbit> {
    if !(params.gamma > 0.0) {
        return Err(Error::Domain("limit cycle search needs gamma > 0"));
    }
    let critical = if params.beta <= 1.0 {
        Some(connection::critical_beta(params.gamma, tol, controls)?)
    } else {
        None
    };
    find_limit_cycle_with(params, critical.as_ref(), tol, controls)
}

/// [`find_limit_cycle`] with a precomputed `β₀(γ)` (required when `β ≤ 1`).
pub fn find_limit_cycle_with(
    params: ModelParams,
    critical: Option<&CriticalResult>,
    tol: f64,
    controls: &IntegrationControls,
) -> Result<PeriodicOrbit> {
    if !(params.gamma > 0.0) {
        return Err(Error::Domain("limit cycle search needs gamma > 0"));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive"));
    }
    let z_hi = params.line_l();
    let (z_lo, d_lo, beta0) = if params.beta <= 1.0 {
        let critical = critical.ok_or(Error::Domain("beta <= 1 needs the critical value"))?;
        if critical.gamma != params.gamma {
            return Err(Error::Domain("critical value was computed for a different gamma"));
        }
        let beta0 = critical.beta0;
        if fabs(params.beta - beta0) < tol || params.beta == 1.0 {
            return Err(Error::Degenerate { beta0 });
        }
        if params.beta < beta0 {
            let shot = shoot_unstable_manifold(params, DEFAULT_OFFSET, controls)?;
            return Err(Error::NoCycle { beta0, evidence: Box::new(shot.trajectory) });
        }
        // R leaves A₀ on the section at z = 0⁺ and reaches K₁ (the section one
        // turn later) at z_c, so P(0⁺) = z_c.
        let shot = shoot_unstable_manifold(params, DEFAULT_OFFSET, controls)?;
        match shot.kind {
            ShootKind::HitLineK1 { z_c } => (0.0, z_c, Some(beta0)),
            _ => return Err(Error::Degenerate { beta0 }),
        }
    } else {
        // Below z = (β − 1)/γ every slope is positive, so orbits started there
        // gain height over a turn.
        let z = 0.5 * (params.beta - 1.0) / params.gamma;
        (z, displacement(z, params, controls)?, None)
    };
    let d_hi = displacement(z_hi, params, controls)?;
    let (z_start, evaluations) = solve_return_map((z_lo, z_hi), (d_lo, d_hi), params, tol, controls)?;
    let mut orbit = describe_orbit(z_start, params, controls)?;
    orbit.evaluations = evaluations + 1;
    orbit.beta0 = beta0;
    Ok(orbit)
}

/// Diagnostics of the cycle through `(φ_s, z_start)`.
pub fn describe_orbit(z_start: f64, params: ModelParams, controls: &IntegrationControls) -> Result<PeriodicOrbit> {
    describe_orbit_sampled(z_start, params, DEFAULT_SAMPLES, controls)
}

pub fn describe_orbit_sampled(
    z_start: f64,
    params: ModelParams,
    n_samples: usize,
    controls: &IntegrationControls,
) -> Result<PeriodicOrbit> {
    let run = lap(z_start, params, controls, false)?;
    if run.fell {
        return Err(Error::Numerical("orbit through z_start falls onto the axis"));
    }
    let a = section_phi(params);
    let n = n_samples.max(2);
    let mut samples = Vec::with_capacity(n);
    let mut z = z_start;
    samples.push(PhaseState::new(a, z));
    for i in 1..n {
        let from = a + TAU * (i - 1) as f64 / n as f64;
        let to = a + TAU * i as f64 / n as f64;
        let piece = graph_run(z, (from, to), params, controls, false)?;
        z = piece.z_end;
        samples.push(PhaseState::new(to, z));
    }
    let min_z = samples.iter().map(|s| s.z).fold(f64::INFINITY, fmin);
    let period = run.transit_time;
    Ok(PeriodicOrbit {
        params,
        section_phi: a,
        z_start,
        samples,
        period,
        mean_velocity: TAU / period,
        phase_integral: run.phase_integral,
        contraction: return_map_derivative(z_start, params, controls)?,
        contraction_expected: exp(-params.gamma * period),
        min_z: fmin(min_z, run.z_end),
        residual: fabs(run.z_end - z_start),
        evaluations: 0,
        beta0: None,
    })
}

/// Central difference `(P(z + h) − P(z − h)) / 2h` with `h = 1e-5 z`.
///
/// Both neighbours are integrated as one system so they share a step
/// sequence and step-selection noise cancels in the difference.
pub fn return_map_derivative(z: f64, params: ModelParams, controls: &IntegrationControls) -> Result<f64> {
    let h = 1e-5 * z;
    let a = section_phi(params);
    let f = move |phi: f64, y: &[f64; 2]| {
        let q = params.beta - libm::sin(phi);
        [q / y[0] - params.gamma, q / y[1] - params.gamma]
    };
    let settings = Settings {
        rel_tol: fmin(controls.rel_tol, 1e-12),
        abs_tol: fmin(controls.abs_tol, 1e-14),
        max_step: controls.max_step,
        event_tol: controls.event_tol,
    };
    let fin = rk::solve(&f, a, [z - h, z + h], a + TAU, &settings, &[], |_, _| {})?;
    if fin.y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Numerical("finite-difference neighbours left z > 0"));
    }
    Ok((fin.y[1] - fin.y[0]) / (2.0 * h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDecay {
    pub start: PhaseState,
    /// `V = z²/2 − cos φ − βφ` at the start and end; `dV/dt = −γz²`.
    pub energy_start: f64,
    pub energy_end: f64,
    /// Largest increase of `V` between consecutive samples.
    pub max_energy_rise: f64,
    /// `|z|` at successive crossings of the vertical line through the sink.
    pub crossing_amplitudes: Vec<f64>,
    pub decays: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstKindReport {
    /// Constant divergence `−γ` of the field.
    pub divergence: f64,
    pub sinks_checked: usize,
    pub orbits: Vec<OrbitDecay>,
    /// No sinks to launch around (`β ≥ 1`).
    pub vacuous: bool,
    pub passed: bool,
}

fn lyapunov(state: PhaseState, beta: f64) -> f64 {
    0.5 * state.z * state.z - libm::cos(state.phi) - beta * state.phi
}

/// Numerical side of the Bendixson argument: the divergence is `−γ < 0`,
/// and orbits launched around the sink `B₀` lose energy monotonically and
/// cross the line through the sink with shrinking amplitude.
pub fn verify_no_first_kind_cycle(params: ModelParams, controls: &IntegrationControls) -> Result<FirstKindReport> {
    if !(params.gamma > 0.0) {
        return Err(Error::Domain("first-kind cycle check needs gamma > 0"));
    }
    let divergence = model::divergence(params);
    let sink = match model::equilibria(params, 0..=0).first() {
        Some(p) if p.kind == FixedPointKind::Sink => *p,
        _ => {
            return Ok(FirstKindReport { divergence, sinks_checked: 0, orbits: Vec::new(), vacuous: true, passed: true });
        }
    };
    let saddle_gap = PI - 2.0 * sink.phi;
    let radius = 0.2 * fmin(1.0, saddle_gap);
    let span = fmin(controls.max_span, 200.0);
    let mut orbits = Vec::new();
    for k in 0..8 {
        let theta = TAU * k as f64 / 8.0;
        let start = PhaseState::new(sink.phi + radius * libm::cos(theta), radius * libm::sin(theta));
        let events = EventSet::none().with_capture(Capture::AllEquilibria);
        let seg = integrate_time_span(start, params, controls, &events, span)?;
        let scale = fmax(1.0, fabs(lyapunov(start, params.beta)));
        let mut max_rise: f64 = 0.0;
        let mut amplitudes = Vec::new();
        for w in seg.samples.windows(2) {
            let (a, b) = (w[0].state, w[1].state);
            max_rise = fmax(max_rise, lyapunov(b, params.beta) - lyapunov(a, params.beta));
            if (a.phi - sink.phi) * (b.phi - sink.phi) < 0.0 {
                amplitudes.push(fabs(b.z));
            }
        }
        let energy_start = lyapunov(start, params.beta);
        let energy_end = lyapunov(seg.end_state(), params.beta);
        let shrinking = amplitudes.windows(2).all(|w| w[1] < w[0]);
        let decays = energy_end < energy_start && max_rise <= 1e-9 * scale && shrinking;
        orbits.push(OrbitDecay {
            start,
            energy_start,
            energy_end,
            max_energy_rise: max_rise,
            crossing_amplitudes: amplitudes,
            decays,
        });
    }
    let passed = divergence < 0.0 && orbits.iter().all(|o| o.decays);
    Ok(FirstKindReport { divergence, sinks_checked: 1, orbits, vacuous: false, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::sqrt;

    fn p(beta: f64, gamma: f64) -> ModelParams {
        ModelParams::new(beta, gamma).unwrap()
    }

    fn mapped(img: ReturnImage) -> f64 {
        match img {
            ReturnImage::Mapped(z) => z,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conservative_map_is_identity_on_rotations() {
        let z = mapped(poincare_map(2.0, p(0.0, 0.0), &IntegrationControls::default()).unwrap());
        assert!((z - 2.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_zero_map_gains_four_pi_beta_in_z_squared() {
        let z = mapped(poincare_map(1.0, p(0.5, 0.0), &IntegrationControls::default()).unwrap());
        let exact = sqrt(1.0 + 4.0 * PI * 0.5);
        assert!((z - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn heavy_damping_map_collapses_onto_g() {
        let z = mapped(poincare_map(0.2, p(2.0, 10.0), &IntegrationControls::default()).unwrap());
        assert!((z - 0.2).abs() < 1e-2, "{z}");
    }

    #[test]
    fn map_rejects_nonpositive_start() {
        assert!(poincare_map(0.0, p(0.5, 1.0), &IntegrationControls::default()).unwrap_err().is_domain());
    }

    #[test]
    fn subcritical_map_falls() {
        let img = poincare_map(0.05, p(0.1, 1.0), &IntegrationControls::default()).unwrap();
        assert!(matches!(img, ReturnImage::FellToAxis { .. }));
    }

    #[test]
    fn heavy_damping_cycle_satisfies_phase_integral() {
        let orbit = find_limit_cycle(p(2.0, 10.0), 1e-10, &IntegrationControls::default()).unwrap();
        let expected = 0.4 * PI;
        assert!((orbit.phase_integral - expected).abs() <= 1e-6 * expected);
        assert!(orbit.min_z > 0.0);
        assert!(orbit.beta0.is_none());
    }

    #[test]
    fn plateau_cycle_exists_above_one() {
        let orbit = find_limit_cycle(p(1.05, 1.5), 1e-9, &IntegrationControls::default()).unwrap();
        assert!(orbit.min_z > 0.0);
        assert!(orbit.mean_velocity > 0.0);
        assert!((orbit.contraction - orbit.contraction_expected).abs() < 1e-6);
    }

    #[test]
    fn below_threshold_has_no_cycle() {
        let err = find_limit_cycle(p(0.1, 0.2), 1e-6, &IntegrationControls::default()).unwrap_err();
        let Error::NoCycle { beta0, evidence } = err else { panic!("{err:?}") };
        assert!((beta0 - 0.252).abs() < 1e-2);
        assert!(matches!(evidence.terminal_event, TerminalEvent::AxisCrossing { .. } | TerminalEvent::EquilibriumCapture(_)));
    }

    #[test]
    fn at_threshold_is_degenerate() {
        let c = IntegrationControls::default();
        let crit = connection::critical_beta(0.5, 1e-6, &c).unwrap();
        let err = find_limit_cycle_with(p(crit.beta0, 0.5), Some(&crit), 1e-6, &c).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
        let crit = connection::critical_beta(2.0, 1e-6, &c).unwrap();
        let err = find_limit_cycle_with(p(1.0, 2.0), Some(&crit), 1e-6, &c).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }

    #[test]
    fn bistable_window_cycle() {
        // β₀(0.3) ≈ 0.38, so β = 0.7 < 1 carries both a cycle and sinks.
        let orbit = find_limit_cycle(p(0.7, 0.3), 1e-9, &IntegrationControls::default()).unwrap();
        let expected = TAU * 0.7 / 0.3;
        assert!((orbit.phase_integral - expected).abs() <= 1e-6 * expected);
        let rel = (orbit.contraction - orbit.contraction_expected).abs() / orbit.contraction_expected;
        assert!(rel < 1e-4, "{} vs {}", orbit.contraction, orbit.contraction_expected);
    }

    #[test]
    fn iteration_reaches_the_same_fixed_point() {
        let params = p(1.5, 0.5);
        let c = IntegrationControls::default();
        let orbit = find_limit_cycle(params, 1e-10, &c).unwrap();
        let IterationOutcome::Converged { z, .. } = iterate_return_map(params.line_l(), params, 1e-10, 500, &c).unwrap() else {
            panic!()
        };
        assert!((z - orbit.z_start).abs() < 1e-9);
    }

    #[test]
    fn first_kind_report() {
        let c = IntegrationControls::default();
        let r = verify_no_first_kind_cycle(p(0.5, 1.0), &c).unwrap();
        assert_eq!(r.divergence, -1.0);
        assert!(r.passed && !r.vacuous);
        let r = verify_no_first_kind_cycle(p(0.0, 0.1), &c).unwrap();
        assert_eq!(r.divergence, -0.1);
        assert!(r.passed);
        assert!(r.orbits.iter().all(|o| o.crossing_amplitudes.len() > 3));
        let r = verify_no_first_kind_cycle(p(1.2, 1.0), &c).unwrap();
        assert!(r.vacuous && r.passed);
        assert!(verify_no_first_kind_cycle(p(0.5, 0.0), &c).is_err());
    }
}
