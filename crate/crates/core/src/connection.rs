//! Shooting along the unstable manifold of the saddle `A₀` and bisection
//! for the saddle-connection drive `β₀(γ)`.
//!
//! For `β < 1` the branch R of the unstable manifold of `A₀ = (φ₋₁, 0)`
//! leaves into `z > 0` and has exactly one of three fates inside the main
//! interval: it drops onto the Φ-axis between the sink `B₀` and the saddle
//! `A₁`, it crosses the vertical line `K₁: φ = φ₁` above `A₁`, or (at
//! `β = β₀`) it runs into `A₁`. Raising β turns the field counter-clockwise
//! in `z > 0`, so the first fate gives way to the second exactly once and
//! the switch can be bisected.

use libm::{fabs, hypot};

use crate::error::{Error, Result};
use crate::integrate::{integrate_time, Capture, Cone, Crossing, EventSet, IntegrationControls, TerminalEvent, TrajectorySegment};
use crate::model::{self, FixedPoint, ModelParams, PhaseState};

/// Displacement of the shot's start point from `A₀` along the unstable
/// eigenvector.
pub const DEFAULT_OFFSET: f64 = 1e-7;

/// Default β-resolution used when deciding whether `β₀(γ) = 1`.
pub const PLATEAU_TOL: f64 = 1e-7;

const FOLD_GAP: f64 = 0.02;
const CONE_DEPTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShootKind {
    /// R returned to the Φ-axis at `φ_c ∈ [φ₀, φ₁]`.
    HitAxis { phi_c: f64 },
    /// R crossed `φ = φ₁` at height `z_c ∈ (0, (β+1)/γ)`.
    HitLineK1 { z_c: f64 },
    /// R entered the capture disc of `A₁`.
    HitSaddle,
}

impl ShootKind {
    /// Drive is below the critical value.
    pub fn is_subcritical(&self) -> bool {
        matches!(self, ShootKind::HitAxis { .. } | ShootKind::HitSaddle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootOutcome {
    pub kind: ShootKind,
    pub trajectory: TrajectorySegment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalResult {
    pub gamma: f64,
    pub beta0: f64,
    pub bracket_width: f64,
    /// Number of shots fired.
    pub evaluations: u32,
}

impl CriticalResult {
    /// `β₀` was pinned to 1 without a sign change below `1 − tol`.
    pub fn on_plateau(&self) -> bool {
        self.beta0 == 1.0
    }
}

/// Start point `A₀ + offset · (1, λ₁)/‖(1, λ₁)‖`.
pub fn manifold_start(params: ModelParams, offset: f64) -> Result<PhaseState> {
    let a0 = model::saddle(params, 0)?;
    let (l1, _) = a0.slopes.expect("saddles carry slopes");
    let norm = hypot(1.0, l1);
    Ok(PhaseState::new(a0.phi + offset / norm, offset * l1 / norm))
}

fn shoot(params: ModelParams, offset: f64, controls: &IntegrationControls, capture_saddle: bool) -> Result<ShootOutcome> {
    if params.beta >= 1.0 {
        return Err(Error::Domain("shooting needs a saddle: beta < 1"));
    }
    if !(offset > 0.0) {
        return Err(Error::Domain("shooting offset must be positive"));
    }
    let start = manifold_start(params, offset)?;
    let a1 = model::saddle(params, 1)?;
    let b0 = model::sink(params, 0)?;
    let mut points = alloc::vec![b0];
    if capture_saddle {
        points.push(a1);
    }
    let mut events = EventSet::none()
        .with_axis(Crossing::Downward, Some(start.phi + controls.event_tol))
        .with_vertical_line(a1.phi)
        .with_capture(Capture::Points(points));
    // Near the fold B₀ and A₁ almost merge and R creeps into B₀ along a
    // slow manifold. Anything under A₁'s stable manifold, left of A₁, can
    // only leave through the axis, so the cone below it settles the shot.
    if a1.phi - b0.phi < FOLD_GAP {
        let (_, l2) = a1.slopes.expect("saddles carry slopes");
        events = events.with_cone(Cone { apex: a1.phi, slope: 0.5 * fabs(l2), depth: CONE_DEPTH });
    }
    let trajectory = integrate_time(start, params, controls, &events)?;
    let kind = match trajectory.terminal_event {
        TerminalEvent::AxisCrossing { phi } => ShootKind::HitAxis { phi_c: phi },
        TerminalEvent::VerticalLineCrossing { z } => ShootKind::HitLineK1 { z_c: z },
        TerminalEvent::EquilibriumCapture(p) if same_point(&p, &a1) => ShootKind::HitSaddle,
        TerminalEvent::EquilibriumCapture(p) => ShootKind::HitAxis { phi_c: p.phi },
        TerminalEvent::ConeEntry { .. } => ShootKind::HitAxis { phi_c: b0.phi },
        TerminalEvent::SpanExhausted => {
            return Err(Error::ClassificationAmbiguous { beta: params.beta, gamma: params.gamma })
        }
        TerminalEvent::BlowUp => return Err(Error::Numerical("unstable-manifold shot blew up")),
    };
    Ok(ShootOutcome { kind, trajectory })
}

fn same_point(a: &FixedPoint, b: &FixedPoint) -> bool {
    a.index == b.index && fabs(a.phi - b.phi) <= 1e-12
}

/// Follow R from `A₀` until it meets the axis, the line `K₁`, or `A₁`.
///
/// `γ = 0` is accepted: the conservative field is the reference case in
/// which R is the explicit arc `z = √(2(1 + cos φ))` ending at `A₁`.
pub fn shoot_unstable_manifold(params: ModelParams, offset: f64, controls: &IntegrationControls) -> Result<ShootOutcome> {
    shoot(params, offset, controls, true)
}

/// R at `β = 1`, where `A₀` is a saddle-node and the outgoing branch is
/// its centre manifold (slope 0). The start is `offset` along that branch,
/// and `capture_radius` is the disc around the next saddle-node.
pub fn shoot_center_manifold(
    params: ModelParams,
    offset: f64,
    capture_radius: f64,
    controls: &IntegrationControls,
) -> Result<ShootOutcome> {
    if params.beta != 1.0 || !(params.gamma > 0.0) {
        return Err(Error::Domain("centre-manifold shot needs beta = 1 and gamma > 0"));
    }
    let left = model::equilibria(params, -2..=-1)[0];
    let right = model::equilibria(params, 0..=1)[0];
    // Quadratic approximation z ≈ u²/(2γ) of the centre manifold.
    let start = PhaseState::new(left.phi + offset, offset * offset / (2.0 * params.gamma));
    let controls = IntegrationControls { capture_radius, ..*controls };
    let events = EventSet::none()
        .with_axis(Crossing::Downward, Some(start.phi + controls.event_tol))
        .with_vertical_line(right.phi + 0.5)
        .with_capture(Capture::Points(alloc::vec![right]));
    let trajectory = integrate_time(start, params, &controls, &events)?;
    let kind = match trajectory.terminal_event {
        TerminalEvent::AxisCrossing { phi } => ShootKind::HitAxis { phi_c: phi },
        TerminalEvent::VerticalLineCrossing { z } => ShootKind::HitLineK1 { z_c: z },
        TerminalEvent::EquilibriumCapture(_) => ShootKind::HitSaddle,
        _ => return Err(Error::ClassificationAmbiguous { beta: params.beta, gamma: params.gamma }),
    };
    Ok(ShootOutcome { kind, trajectory })
}

/// Subcritical classification of R at `(beta, gamma)`. The capture disc of
/// `A₁` is switched off so that every shot resolves to a side.
pub fn is_subcritical(beta: f64, gamma: f64, controls: &IntegrationControls) -> Result<bool> {
    let params = ModelParams::new(beta, gamma)?;
    Ok(shoot(params, DEFAULT_OFFSET, controls, false)?.kind.is_subcritical())
}

/// Bisection on β for the saddle connection `R(β₀) → A₁`.
///
/// A first shot at `β = 1 − max(tol, PLATEAU_TOL)` decides the plateau: if
/// R is still subcritical there, `β₀ = 1` and the reported bracket width is
/// that probe distance. Closer to the fold both `A₀` and `B₀` turn so slow
/// that no shot resolves in a sane time.
pub fn critical_beta(gamma: f64, tol: f64, controls: &IntegrationControls) -> Result<CriticalResult> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain("critical beta needs gamma > 0"));
    }
    if !(tol > 0.0 && tol < 0.5) {
        return Err(Error::Domain("bisection tolerance must lie in (0, 0.5)"));
    }
    let mut evaluations = 1;
    let probe = tol.max(PLATEAU_TOL);
    let mut hi = 1.0 - probe;
    if is_subcritical(hi, gamma, controls)? {
        return Ok(CriticalResult { gamma, beta0: 1.0, bracket_width: probe, evaluations });
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if is_subcritical(mid, gamma, controls)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalResult { gamma, beta0: 0.5 * (lo + hi), bracket_width: hi - lo, evaluations })
}

/// Whether `β₀(γ) = 1` at β-resolution `beta_tol`.
pub fn on_plateau(gamma: f64, beta_tol: f64, controls: &IntegrationControls) -> Result<bool> {
    if !(gamma > 0.0) {
        return Err(Error::Domain("plateau test needs gamma > 0"));
    }
    is_subcritical(1.0 - beta_tol, gamma, controls)
}

/// Smallest damping with `β₀(γ) = 1`, by bisection on [`on_plateau`].
pub fn gamma_min(tol: f64, controls: &IntegrationControls) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain("gamma_min tolerance must be positive"));
    }
    let (mut lo, mut hi) = (0.5, 2.0);
    if on_plateau(lo, PLATEAU_TOL, controls)? || !on_plateau(hi, PLATEAU_TOL, controls)? {
        return Err(Error::Numerical("plateau predicate does not change sign on [0.5, 2]"));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if on_plateau(mid, PLATEAU_TOL, controls)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
