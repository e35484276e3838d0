//! Grid drivers: the critical curve `β₀(γ)`, mean-velocity curves and
//! phase-portrait bundles.
//!
//! Every row is computed from its own inputs only, so callers may evaluate
//! rows in any order or in parallel and reassemble them by index.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::TAU;

use libm::{fabs, fmin};

use crate::connection::{self, shoot_center_manifold, shoot_unstable_manifold, CriticalResult, ShootOutcome, DEFAULT_OFFSET};
use crate::cycle::find_limit_cycle_with;
use crate::error::{Error, Result};
use crate::integrate::{integrate_time, Capture, EventSet, IntegrationControls, TerminalEvent, TrajectorySegment};
use crate::model::{self, FixedPoint, ModelParams, PhaseState};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    /// Absent on critical-curve rows.
    pub beta: Option<f64>,
    pub beta0: Option<f64>,
    /// `2π/T` on a running cycle, 0 when pinned.
    pub mean_velocity: f64,
    pub cycle_found: bool,
    pub period: Option<f64>,
    /// Final width of the β-bisection bracket.
    pub bracket_width: Option<f64>,
    /// Shots for the bisection plus return-map evaluations for the cycle.
    pub evaluations: u32,
    pub error: Option<String>,
}

impl SweepRow {
    fn empty(gamma: f64, beta: Option<f64>) -> Self {
        Self {
            gamma,
            beta,
            beta0: None,
            mean_velocity: 0.0,
            cycle_found: false,
            period: None,
            bracket_width: None,
            evaluations: 0,
            error: None,
        }
    }

    fn with_critical(mut self, c: &CriticalResult) -> Self {
        self.beta0 = Some(c.beta0);
        self.bracket_width = Some(c.bracket_width);
        self.evaluations = c.evaluations;
        self
    }
}

/// One row of the critical curve.
pub fn critical_row(gamma: f64, tol: f64, controls: &IntegrationControls) -> SweepRow {
    let row = SweepRow::empty(gamma, None);
    match connection::critical_beta(gamma, tol, controls) {
        Ok(c) => row.with_critical(&c),
        Err(e) => SweepRow { error: Some(e.to_string()), ..row },
    }
}

pub fn critical_curve(gamma_grid: &[f64], tol: f64, controls: &IntegrationControls) -> Vec<SweepRow> {
    gamma_grid.iter().map(|&g| critical_row(g, tol, controls)).collect()
}

/// Shared input of the rows of one velocity curve: `β₀(γ)` is computed once
/// if any grid drive is at most 1.
#[derive(Debug, Clone)]
pub struct VelocityPlan {
    pub gamma: f64,
    pub tol: f64,
    pub critical: Option<core::result::Result<CriticalResult, Error>>,
}

impl VelocityPlan {
    pub fn new(gamma: f64, beta_grid: &[f64], tol: f64, controls: &IntegrationControls) -> Self {
        let critical = beta_grid
            .iter()
            .any(|&b| b <= 1.0)
            .then(|| connection::critical_beta(gamma, tol, controls));
        Self { gamma, tol, critical }
    }

    pub fn row(&self, beta: f64, controls: &IntegrationControls) -> SweepRow {
        let mut row = SweepRow::empty(self.gamma, Some(beta));
        let critical = match (&self.critical, beta <= 1.0) {
            (Some(Ok(c)), true) => {
                row = row.with_critical(c);
                Some(c)
            }
            (Some(Err(e)), true) => return SweepRow { error: Some(e.to_string()), ..row },
            (None, true) => return SweepRow { error: Some("critical value missing from plan".into()), ..row },
            (_, false) => None,
        };
        let params = match ModelParams::new(beta, self.gamma) {
            Ok(p) => p,
            Err(e) => return SweepRow { error: Some(e.to_string()), ..row },
        };
        match find_limit_cycle_with(params, critical, self.tol, controls) {
            Ok(orbit) => {
                row.mean_velocity = orbit.mean_velocity;
                row.period = Some(orbit.period);
                row.cycle_found = true;
                row.evaluations += orbit.evaluations;
            }
            // Pinned: trajectories end in a sink, or on the connection itself.
            Err(Error::NoCycle { .. }) | Err(Error::Degenerate { .. }) => {}
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }
}

pub fn velocity_row(gamma: f64, beta: f64, tol: f64, controls: &IntegrationControls) -> SweepRow {
    VelocityPlan::new(gamma, &[beta], tol, controls).row(beta, controls)
}

pub fn velocity_curve(gamma: f64, beta_grid: &[f64], tol: f64, controls: &IntegrationControls) -> Vec<SweepRow> {
    let plan = VelocityPlan::new(gamma, beta_grid, tol, controls);
    beta_grid.iter().map(|&b| plan.row(b, controls)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisOptions {
    /// Time allowed to settle at each drive before measuring.
    pub transient: f64,
    /// Averaging window for `Δφ / Δt`.
    pub window: f64,
}

impl Default for HysteresisOptions {
    fn default() -> Self {
        Self { transient: 200.0, window: 200.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisRow {
    pub beta: f64,
    pub up_velocity: f64,
    pub down_velocity: f64,
}

/// Time-averaged velocity along an increasing and then a decreasing drive
/// ramp, each step continuing from the state the previous one ended in.
///
/// Exploratory: for small γ the window `β₀ < β < 1` holds both a sink and
/// the running cycle, and the two ramps legitimately disagree there.
pub fn hysteresis_curve(
    gamma: f64,
    beta_grid: &[f64],
    options: HysteresisOptions,
    controls: &IntegrationControls,
) -> Result<Vec<HysteresisRow>> {
    if !(gamma > 0.0) {
        return Err(Error::Domain("hysteresis scan needs gamma > 0"));
    }
    if !(options.transient >= 0.0 && options.window > 0.0) {
        return Err(Error::Domain("hysteresis spans must be positive"));
    }
    let mut order: Vec<usize> = (0..beta_grid.len()).collect();
    order.sort_by(|&a, &b| beta_grid[a].total_cmp(&beta_grid[b]));

    let mut up = alloc::vec![0.0; beta_grid.len()];
    let mut state = PhaseState::new(0.0, 0.0);
    for &i in &order {
        let (v, s) = settle(state, ModelParams::new(beta_grid[i], gamma)?, options, controls)?;
        up[i] = v;
        state = s;
    }
    let mut down = alloc::vec![0.0; beta_grid.len()];
    if let Some(&top) = order.last() {
        state = PhaseState::new(0.0, beta_grid[top] / gamma);
    }
    for &i in order.iter().rev() {
        let (v, s) = settle(state, ModelParams::new(beta_grid[i], gamma)?, options, controls)?;
        down[i] = v;
        state = s;
    }
    Ok(beta_grid
        .iter()
        .enumerate()
        .map(|(i, &beta)| HysteresisRow { beta, up_velocity: up[i], down_velocity: down[i] })
        .collect())
}

fn settle(
    start: PhaseState,
    params: ModelParams,
    options: HysteresisOptions,
    controls: &IntegrationControls,
) -> Result<(f64, PhaseState)> {
    let events = EventSet::none().with_capture(Capture::AllEquilibria);
    let mut state = start;
    if options.transient > 0.0 {
        let c = IntegrationControls { max_span: options.transient, ..*controls };
        let seg = integrate_time(state, params, &c, &events)?;
        if let TerminalEvent::EquilibriumCapture(p) = seg.terminal_event {
            return Ok((0.0, p.state().reduced(-core::f64::consts::PI)));
        }
        state = seg.end_state().reduced(-core::f64::consts::PI);
    }
    let c = IntegrationControls { max_span: options.window, ..*controls };
    let seg = integrate_time(state, params, &c, &events)?;
    match seg.terminal_event {
        TerminalEvent::EquilibriumCapture(p) => Ok((0.0, p.state().reduced(-core::f64::consts::PI))),
        _ => {
            let end = seg.end_state();
            Ok(((end.phi - state.phi) / options.window, end.reduced(-core::f64::consts::PI)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overlays {
    /// Curve G, `z = (β − sin φ)/γ` (skipped when `γ = 0`).
    pub g: bool,
    pub equilibria: bool,
    /// Unstable-manifold shot R from `A₀`.
    pub shot: bool,
}

impl Overlays {
    pub const ALL: Self = Self { g: true, equilibria: true, shot: true };
    pub const NONE: Self = Self { g: false, equilibria: false, shot: false };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitOptions {
    /// Time span of each seed trajectory.
    pub span: f64,
    pub overlays: Overlays,
    pub g_samples: usize,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self { span: 40.0, overlays: Overlays::ALL, g_samples: 257 }
    }
}

#[derive(Debug, Clone)]
pub struct Portrait {
    pub params: ModelParams,
    /// Main interval `[−π − φ₀, π − φ₀]`.
    pub interval: (f64, f64),
    /// Half-height of the plotting window in z.
    pub z_extent: f64,
    pub trajectories: Vec<core::result::Result<TrajectorySegment, Error>>,
    pub g_curve: Option<Vec<PhaseState>>,
    pub equilibria: Vec<FixedPoint>,
    pub shot: Option<core::result::Result<ShootOutcome, Error>>,
}

/// `(β + 1)/γ + 1`, the height of line L plus a margin; 4 when `γ = 0`.
pub fn portrait_z_extent(params: ModelParams) -> f64 {
    if params.gamma > 0.0 {
        params.line_l() + 1.0
    } else {
        4.0
    }
}

/// Seeds on a `columns × rows` grid covering the plotting window.
pub fn grid_seeds(params: ModelParams, columns: usize, rows: usize) -> Vec<PhaseState> {
    let (a, b) = params.main_interval();
    let h = portrait_z_extent(params) - 1.0;
    let mut seeds = Vec::with_capacity(columns * rows);
    for j in 0..rows {
        let z = if rows > 1 { -h + 2.0 * h * j as f64 / (rows - 1) as f64 } else { 0.0 };
        for i in 0..columns {
            let phi = a + (b - a) * (i as f64 + 0.5) / columns as f64;
            seeds.push(PhaseState::new(phi, z));
        }
    }
    seeds
}

pub fn phase_portrait(
    params: ModelParams,
    seeds: &[PhaseState],
    options: PortraitOptions,
    controls: &IntegrationControls,
) -> Result<Portrait> {
    if seeds.iter().any(|s| !(s.phi.is_finite() && s.z.is_finite())) {
        return Err(Error::Domain("seeds must be finite"));
    }
    let interval = params.main_interval();
    let run = IntegrationControls { max_span: options.span, ..*controls };
    let events = if params.gamma > 0.0 {
        EventSet::none().with_capture(Capture::AllEquilibria)
    } else {
        EventSet::none()
    };
    let trajectories = seeds.iter().map(|&s| integrate_time(s, params, &run, &events)).collect();

    let g_curve = (options.overlays.g && params.gamma > 0.0).then(|| {
        let n = options.g_samples.max(2);
        (0..n)
            .map(|i| {
                let phi = interval.0 + TAU * i as f64 / (n - 1) as f64;
                PhaseState::new(phi, (params.beta - libm::sin(phi)) / params.gamma)
            })
            .collect()
    });

    let equilibria = if options.overlays.equilibria {
        model::equilibria(params, -1..=1)
            .into_iter()
            .filter(|p| p.phi >= interval.0 - 1e-12 && p.phi <= interval.1 + 1e-12)
            .collect()
    } else {
        Vec::new()
    };

    let shot = if !options.overlays.shot || params.beta > 1.0 {
        None
    } else if params.beta == 1.0 {
        (params.gamma > 0.0).then(|| shoot_center_manifold(params, 1e-2, 1e-3, controls))
    } else {
        Some(shoot_unstable_manifold(params, DEFAULT_OFFSET, controls))
    };

    Ok(Portrait { params, interval, z_extent: portrait_z_extent(params), trajectories, g_curve, equilibria, shot })
}

/// Cut a trajectory into pieces that each lie in `[a, a + 2π)` after
/// reduction, breaking wherever the orbit wraps around the cylinder.
pub fn wrap_segment(states: impl IntoIterator<Item = PhaseState>, a: f64) -> Vec<Vec<PhaseState>> {
    let mut pieces: Vec<Vec<PhaseState>> = Vec::new();
    let mut turn: Option<f64> = None;
    for s in states {
        let r = s.reduced(a);
        let k = s.phi - r.phi;
        if turn.is_none_or(|t| fabs(t - k) > 0.5 * TAU) {
            pieces.push(Vec::new());
            turn = Some(k);
        }
        pieces.last_mut().expect("piece opened above").push(r);
    }
    pieces.retain(|p| !p.is_empty());
    pieces
}

/// Smallest drive in `rows` with positive velocity.
pub fn depinning_onset(rows: &[SweepRow]) -> Option<f64> {
    rows.iter().filter(|r| r.mean_velocity > 0.0).filter_map(|r| r.beta).reduce(fmin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::ShootKind;
    use crate::model::{slope_field, Slope};
    use core::f64::consts::PI;

    fn c() -> IntegrationControls {
        IntegrationControls::default()
    }

    #[test]
    fn critical_rows() {
        let rows = critical_curve(&[1.193, 1.5, 2.0, 5.0], 1e-6, &c());
        for r in &rows {
            assert!((r.beta0.unwrap() - 1.0).abs() < 5e-3, "{r:?}");
            assert!(r.error.is_none());
        }
        let rows = critical_curve(&[0.01, 0.02, 0.04], 1e-8, &c());
        for r in &rows {
            let ratio = r.beta0.unwrap() / r.gamma / (4.0 / PI);
            assert!((ratio - 1.0).abs() < 0.02, "{r:?}");
        }
    }

    #[test]
    fn row_errors_are_recorded() {
        let rows = critical_curve(&[0.5, 0.0, 1.0], 1e-6, &c());
        assert_eq!(rows.len(), 3);
        assert!(rows[0].error.is_none() && rows[2].error.is_none());
        assert!(rows[1].error.is_some());
    }

    #[test]
    fn overdamped_velocity_curve() {
        let rows = velocity_curve(2.0, &[0.5, 1.0, 1.1, 2.0, 4.0, 8.0], 1e-6, &c());
        assert_eq!(rows[0].mean_velocity, 0.0);
        assert_eq!(rows[1].mean_velocity, 0.0);
        assert!(!rows[0].cycle_found);
        let v: Vec<f64> = rows[2..].iter().map(|r| r.mean_velocity).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
        assert!((v[3] / (8.0 / 2.0) - 1.0).abs() < 0.01);
        for r in &rows {
            assert_eq!(r.mean_velocity == 0.0, !r.cycle_found);
        }
    }

    #[test]
    fn depinning_brackets_critical_value() {
        let b0 = connection::critical_beta(0.5, 1e-8, &c()).unwrap().beta0;
        let above = velocity_row(0.5, b0 + 1e-3, 1e-8, &c());
        let below = velocity_row(0.5, b0 - 1e-3, 1e-8, &c());
        let further = velocity_row(0.5, b0 + 0.1, 1e-8, &c());
        assert!(above.mean_velocity > 0.0 && above.mean_velocity < further.mean_velocity);
        assert_eq!(below.mean_velocity, 0.0);
        let grid: Vec<f64> = (0..=20).map(|i| 0.5 + 0.025 * i as f64).collect();
        let onset = depinning_onset(&velocity_curve(0.5, &grid, 1e-8, &c())).unwrap();
        assert!(onset >= b0 && onset - b0 <= 0.025);
    }

    #[test]
    fn hysteresis_window_at_small_damping() {
        let rows = hysteresis_curve(0.2, &[0.1, 0.5, 0.9, 1.2], HysteresisOptions::default(), &c()).unwrap();
        assert_eq!(rows[0].up_velocity, 0.0);
        assert_eq!(rows[0].down_velocity, 0.0);
        // Between β₀(0.2) ≈ 0.25 and 1 the sink and the cycle coexist.
        assert_eq!(rows[1].up_velocity, 0.0);
        assert!(rows[1].down_velocity > 0.0);
        assert!(rows[3].up_velocity > 0.0);
    }

    #[test]
    fn conservative_portrait_has_the_separatrix_arc() {
        let p = ModelParams::new(0.0, 0.0).unwrap();
        let seed = PhaseState::new(-PI + 1e-3, libm::sqrt(2.0 * (1.0 + libm::cos(-PI + 1e-3))));
        let tight = IntegrationControls { rel_tol: 1e-12, abs_tol: 1e-14, ..c() };
        let portrait = phase_portrait(p, &[seed], PortraitOptions { span: 10.0, ..Default::default() }, &tight).unwrap();
        assert!(portrait.g_curve.is_none());
        let shot = portrait.shot.unwrap().unwrap();
        assert_eq!(shot.kind, ShootKind::HitSaddle);
        for s in &shot.trajectory.samples {
            let arc = libm::sqrt(2.0 * (1.0 + libm::cos(s.state.phi)));
            assert!((s.state.z - arc).abs() < 1e-6);
        }
        let seg = portrait.trajectories[0].as_ref().unwrap();
        for s in &seg.samples {
            let arc = libm::sqrt(2.0 * (1.0 + libm::cos(s.state.phi)));
            assert!((s.state.z - arc).abs() < 1e-6);
        }
    }

    #[test]
    fn portrait_overlays() {
        let p = ModelParams::new(0.5, 1.0).unwrap();
        let seeds = [PhaseState::new(0.0, 2.0), PhaseState::new(0.0, 0.2)];
        for s in seeds {
            let expected = if s.z > model::curve_g(s.phi, p).unwrap() { -1.0 } else { 1.0 };
            let Slope::Finite(m) = slope_field(s, p) else { panic!() };
            assert_eq!(m.signum(), expected);
        }
        let portrait = phase_portrait(p, &seeds, PortraitOptions::default(), &c()).unwrap();
        assert_eq!(portrait.equilibria.len(), 3);
        assert!(portrait.g_curve.as_ref().unwrap().len() > 100);
        assert!(portrait.shot.is_some());
        assert!(portrait.trajectories.iter().all(|t| t.is_ok()));

        let p = ModelParams::new(1.2, 1.0).unwrap();
        let portrait = phase_portrait(p, &grid_seeds(p, 4, 3), PortraitOptions::default(), &c()).unwrap();
        assert!(portrait.equilibria.is_empty());
        assert!(portrait.shot.is_none());
        assert_eq!(portrait.trajectories.len(), 12);
    }

    #[test]
    fn saddle_node_shot_lands_flat() {
        let p = ModelParams::new(1.0, 2.0).unwrap();
        let portrait = phase_portrait(p, &[], PortraitOptions::default(), &c()).unwrap();
        assert_eq!(portrait.equilibria.len(), 2);
        let shot = portrait.shot.unwrap().unwrap();
        let end = shot.trajectory.end_state();
        assert!((end.phi - PI / 2.0).abs() < 2e-3);
        assert!(end.z.abs() < 1e-5);
    }

    #[test]
    fn wrapping_breaks_at_turns() {
        let states = (0..100).map(|i| PhaseState::new(-PI + 0.1 * i as f64, 1.0));
        let pieces = wrap_segment(states, -PI);
        assert_eq!(pieces.len(), 2);
        assert!(pieces.iter().flatten().all(|s| s.phi >= -PI && s.phi < PI));
    }
}
