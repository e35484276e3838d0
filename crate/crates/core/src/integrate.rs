//! Adaptive integration of the field in time, and of the graph form
//! `dz/dφ = (β − sin φ)/z − γ` in the angle, with terminal events.

use alloc::vec::Vec;

use libm::{hypot, round, sin};
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{self, FixedPoint, ModelParams, PhaseState};
use crate::rk::{self, Direction, Event, Settings, Stop};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Bound on the time span of time-domain runs.
    pub max_span: f64,
    pub event_tol: f64,
    /// Radius of the disc around an equilibrium that counts as reaching it.
    pub capture_radius: f64,
    /// Graph-form runs hand over to the time domain once `z` falls to this.
    pub z_floor: f64,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            max_span: 1e6,
            event_tol: 1e-10,
            capture_radius: 1e-6,
            z_floor: 1e-8,
        }
    }
}

impl IntegrationControls {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rel_tol, self.abs_tol, self.max_step, self.max_span, self.event_tol];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("integration controls must be finite and strictly positive"));
        }
        if !(self.capture_radius >= 0.0 && self.z_floor > 0.0) {
            return Err(Error::Domain("capture radius must be >= 0 and z floor > 0"));
        }
        Ok(())
    }

    /// Same controls with tolerances tightened (or loosened) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }

    pub(crate) fn settings(&self) -> Settings {
        Settings {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            event_tol: self.event_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Independent {
    Time,
    /// Graph form: the sample abscissa is φ itself.
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Time, or φ for graph-form segments.
    pub s: f64,
    pub state: PhaseState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalEvent {
    SpanExhausted,
    AxisCrossing { phi: f64 },
    VerticalLineCrossing { z: f64 },
    EquilibriumCapture(FixedPoint),
    /// Entered the [`Cone`] of the event set.
    ConeEntry { phi: f64, z: f64 },
    BlowUp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    pub independent: Independent,
    pub samples: Vec<Sample>,
    pub terminal_event: TerminalEvent,
}

impl TrajectorySegment {
    pub fn last(&self) -> Sample {
        *self.samples.last().expect("segments always hold the start sample")
    }

    pub fn end_state(&self) -> PhaseState {
        self.last().state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Downward,
    Upward,
    Either,
}

impl Crossing {
    fn direction(self) -> Direction {
        match self {
            Crossing::Downward => Direction::Falling,
            Crossing::Upward => Direction::Rising,
            Crossing::Either => Direction::Either,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisWatch {
    pub crossing: Crossing,
    /// Stay disarmed until φ exceeds this value.
    pub arm_after_phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Capture {
    #[default]
    None,
    Points(Vec<FixedPoint>),
    /// Every equilibrium of the field, on the whole universal cover.
    AllEquilibria,
}

/// Wedge `apex − depth < φ < apex`, `0 < z < slope·(apex − φ)` to the
/// left of a point on the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    pub apex: f64,
    pub slope: f64,
    pub depth: f64,
}

impl Cone {
    /// Negative inside, positive outside.
    fn g(&self, phi: f64, z: f64) -> f64 {
        let s = self.apex - phi;
        (-s).max(s - self.depth).max(-z).max(z - self.slope * s)
    }
}

/// Terminal events for [`integrate_time`]; the first one reached ends the run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSet {
    pub axis: Option<AxisWatch>,
    pub vertical_line: Option<f64>,
    pub capture: Capture,
    pub cone: Option<Cone>,
}

impl EventSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_axis(mut self, crossing: Crossing, arm_after_phi: Option<f64>) -> Self {
        self.axis = Some(AxisWatch { crossing, arm_after_phi });
        self
    }

    pub fn with_vertical_line(mut self, phi: f64) -> Self {
        self.vertical_line = Some(phi);
        self
    }

    pub fn with_capture(mut self, capture: Capture) -> Self {
        self.capture = capture;
        self
    }

    pub fn with_cone(mut self, cone: Cone) -> Self {
        self.cone = Some(cone);
        self
    }
}

/// Nearest equilibrium to `state`, searching the lattice around its φ.
pub(crate) fn nearest_equilibrium(state: PhaseState, params: ModelParams) -> Option<FixedPoint> {
    params.phi0()?;
    let n0 = round(state.phi / PI) as i64;
    model::equilibria(params, n0 - 2..=n0 + 2)
        .into_iter()
        .min_by(|a, b| {
            let da = hypot(state.phi - a.phi, state.z);
            let db = hypot(state.phi - b.phi, state.z);
            da.total_cmp(&db)
        })
}

fn captured_point(state: PhaseState, params: ModelParams, capture: &Capture) -> Option<FixedPoint> {
    match capture {
        Capture::None => None,
        Capture::AllEquilibria => nearest_equilibrium(state, params),
        Capture::Points(points) => points
            .iter()
            .min_by(|a, b| state.distance(&a.state()).total_cmp(&state.distance(&b.state())))
            .copied(),
    }
}

fn time_field(params: ModelParams) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    move |_t, y| [y[1], params.beta - sin(y[0]) - params.gamma * y[1]]
}

/// Integrate the field forward in time from `start` for at most
/// `controls.max_span`, stopping at the first event of `events`.
pub fn integrate_time(
    start: PhaseState,
    params: ModelParams,
    controls: &IntegrationControls,
    events: &EventSet,
) -> Result<TrajectorySegment> {
    integrate_time_span(start, params, controls, events, controls.max_span)
}

pub(crate) fn integrate_time_span(
    start: PhaseState,
    params: ModelParams,
    controls: &IntegrationControls,
    events: &EventSet,
    span: f64,
) -> Result<TrajectorySegment> {
    controls.validate()?;
    if !(start.phi.is_finite() && start.z.is_finite()) {
        return Err(Error::Domain("start state must be finite"));
    }
    let f = time_field(params);

    let axis_g = |_t: f64, y: &[f64; 2]| y[1];
    let arm_phi = events.axis.and_then(|a| a.arm_after_phi);
    let axis_armed = move |_t: f64, y: &[f64; 2]| arm_phi.is_none_or(|p| y[0] > p);
    let line = events.vertical_line.unwrap_or(0.0);
    let line_g = move |_t: f64, y: &[f64; 2]| y[0] - line;
    let radius = controls.capture_radius;
    let capture = &events.capture;
    let capture_g = move |_t: f64, y: &[f64; 2]| {
        let s = PhaseState::new(y[0], y[1]);
        match captured_point(s, params, capture) {
            Some(p) => s.distance(&p.state()) - radius,
            None => 1.0,
        }
    };

    let cone = events.cone;
    let cone_g = move |_t: f64, y: &[f64; 2]| cone.map_or(1.0, |c| c.g(y[0], y[1]));

    #[derive(Clone, Copy)]
    enum Kind {
        Axis,
        Line,
        Capture,
        Cone,
    }
    let mut evs: Vec<Event<'_, 2>> = Vec::new();
    let mut kinds = Vec::new();
    if let Some(axis) = events.axis {
        evs.push(Event {
            g: &axis_g,
            direction: axis.crossing.direction(),
            armed: arm_phi.is_some().then_some(&axis_armed as &dyn Fn(f64, &[f64; 2]) -> bool),
        });
        kinds.push(Kind::Axis);
    }
    if events.vertical_line.is_some() {
        evs.push(Event { g: &line_g, direction: Direction::Either, armed: None });
        kinds.push(Kind::Line);
    }
    if !matches!(events.capture, Capture::None) && radius > 0.0 {
        evs.push(Event { g: &capture_g, direction: Direction::Falling, armed: None });
        kinds.push(Kind::Capture);
    }
    if cone.is_some() {
        evs.push(Event { g: &cone_g, direction: Direction::Falling, armed: None });
        kinds.push(Kind::Cone);
    }

    let mut samples = Vec::new();
    let fin = rk::solve(
        &f,
        0.0,
        [start.phi, start.z],
        span,
        &controls.settings(),
        &evs,
        |t, y| samples.push(Sample { s: t, state: PhaseState::new(y[0], y[1]) }),
    )?;
    let end = PhaseState::new(fin.y[0], fin.y[1]);
    let terminal_event = match fin.stop {
        Stop::End => TerminalEvent::SpanExhausted,
        Stop::BlowUp => TerminalEvent::BlowUp,
        Stop::Event(i) => match kinds[i] {
            Kind::Axis => TerminalEvent::AxisCrossing { phi: end.phi },
            Kind::Line => TerminalEvent::VerticalLineCrossing { z: end.z },
            Kind::Capture => TerminalEvent::EquilibriumCapture(
                captured_point(end, params, &events.capture).expect("capture event implies a point"),
            ),
            Kind::Cone => TerminalEvent::ConeEntry { phi: end.phi, z: end.z },
        },
    };
    Ok(TrajectorySegment { independent: Independent::Time, samples, terminal_event })
}

/// A graph-form run with its quadratures `∫z dφ` and `∫dφ/z`.
#[derive(Debug, Clone)]
pub(crate) struct GraphRun {
    pub segment: TrajectorySegment,
    pub z_end: f64,
    pub phase_integral: f64,
    pub transit_time: f64,
    pub fell: bool,
}

fn graph_field(params: ModelParams) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    move |phi, y| {
        let z = y[0];
        [(params.beta - sin(phi)) / z - params.gamma, z, 1.0 / z]
    }
}

pub(crate) fn graph_run(
    z0: f64,
    phi_span: (f64, f64),
    params: ModelParams,
    controls: &IntegrationControls,
    record: bool,
) -> Result<GraphRun> {
    controls.validate()?;
    if !(z0 > 0.0) || !z0.is_finite() {
        return Err(Error::Domain("graph form needs z0 > 0"));
    }
    let (a, b) = phi_span;
    if !(a.is_finite() && b.is_finite() && b >= a) {
        return Err(Error::Domain("phi span must be finite and increasing"));
    }
    let f = graph_field(params);
    let floor = controls.z_floor;
    let g = move |_phi: f64, y: &[f64; 3]| y[0] - floor;
    let evs = [Event { g: &g, direction: Direction::Falling, armed: None }];
    let mut samples = Vec::new();
    let mut last = (a, [z0, 0.0, 0.0]);
    let result = rk::solve(&f, a, [z0, 0.0, 0.0], b, &controls.settings(), &evs, |phi, y| {
        last = (phi, *y);
        if record {
            samples.push(Sample { s: phi, state: PhaseState::new(phi, y[0]) });
        }
    });
    // Approaching z = 0 the graph slope blows up like 1/z and the step can
    // collapse before z reaches the floor; both cases finish in time.
    let (fin_t, fin_y, stop) = match result {
        Ok(fin) => (fin.t, fin.y, fin.stop),
        Err(Error::StiffnessFailure { .. }) if last.1[0] < 1e-2 * z0.max(1.0) => (last.0, last.1, Stop::Event(0)),
        Err(e) => return Err(e),
    };
    if !record {
        samples.push(Sample { s: a, state: PhaseState::new(a, z0) });
        if fin_t > a {
            samples.push(Sample { s: fin_t, state: PhaseState::new(fin_t, fin_y[0]) });
        }
    }
    let mut run = GraphRun {
        segment: TrajectorySegment {
            independent: Independent::Phase,
            samples,
            terminal_event: TerminalEvent::SpanExhausted,
        },
        z_end: fin_y[0],
        phase_integral: fin_y[1],
        transit_time: fin_y[2],
        fell: false,
    };
    match stop {
        Stop::End => {}
        Stop::BlowUp => run.segment.terminal_event = TerminalEvent::BlowUp,
        Stop::Event(_) => {
            run.fell = true;
            let events = EventSet::none()
                .with_axis(Crossing::Downward, None)
                .with_capture(Capture::AllEquilibria);
            let tail = integrate_time(PhaseState::new(fin_t, fin_y[0]), params, controls, &events)?;
            let mut last_phi = fin_t;
            for smp in tail.samples.iter().skip(1) {
                if record && smp.state.phi > last_phi {
                    run.segment.samples.push(Sample { s: smp.state.phi, state: smp.state });
                    last_phi = smp.state.phi;
                }
            }
            let end = tail.end_state();
            run.z_end = end.z;
            run.segment.terminal_event = match tail.terminal_event {
                TerminalEvent::SpanExhausted => TerminalEvent::AxisCrossing { phi: end.phi },
                other => other,
            };
            if !record {
                run.segment.samples.push(Sample { s: end.phi, state: end });
            }
        }
    }
    Ok(run)
}

/// Integrate `dz/dφ` from `(phi_span.0, z0)` to `phi_span.1`.
///
/// Ends with `AxisCrossing` when the trajectory drops onto the Φ-axis (the
/// last stretch below `z_floor` is done in the time domain), otherwise with
/// `SpanExhausted` and the final `z` in the last sample.
pub fn integrate_graph(
    z0: f64,
    phi_span: (f64, f64),
    params: ModelParams,
    controls: &IntegrationControls,
) -> Result<TrajectorySegment> {
    Ok(graph_run(z0, phi_span, params, controls, true)?.segment)
}

/// Energy `z²/2 − cos φ` of the conservative pendulum.
pub fn conservative_energy(state: PhaseState) -> f64 {
    0.5 * state.z * state.z - libm::cos(state.phi)
}
