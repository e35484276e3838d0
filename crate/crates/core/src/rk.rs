//! Dormand–Prince 5(4) with PI step control and event localisation.
//!
//! Events are scalar functions `g(t, y)` checked at every accepted step. A
//! sign change inside the step is localised by regula falsi (Illinois) on
//! `h ↦ g(t + h, Φ_h(y))`, where `Φ_h` is the same RK step re-taken with the
//! shortened length, so the located state carries the integrator's own
//! accuracy rather than that of an interpolant.

use libm::{fabs, fmax, fmin, pow, sqrt};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b̂ (fifth minus fourth order weights).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const ALPHA: f64 = 0.7 / 5.0;
const BETA: f64 = 0.4 / 5.0;
const MAX_STEPS: u64 = 200_000_000;
const BLOW_UP: f64 = 1e100;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    Rising,
    Falling,
    Either,
}

pub(crate) struct Event<'a, const N: usize> {
    pub g: &'a dyn Fn(f64, &[f64; N]) -> f64,
    pub direction: Direction,
    /// Evaluated at the end of a step; the event is ignored while false.
    pub armed: Option<&'a dyn Fn(f64, &[f64; N]) -> bool>,
}

impl<const N: usize> Event<'_, N> {
    fn fires(&self, before: f64, after: f64) -> bool {
        match self.direction {
            Direction::Rising => before < 0.0 && after >= 0.0,
            Direction::Falling => before > 0.0 && after <= 0.0,
            Direction::Either => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Stop {
    End,
    Event(usize),
    BlowUp,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Finish<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub stop: Stop,
}

struct Step<const N: usize> {
    y: [f64; N],
    err: [f64; N],
    k7: [f64; N],
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn dp_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Step<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y5 = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y5);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Step { y: y5, err, k7 }
}

fn error_norm<const N: usize>(s: &Settings, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = s.abs_tol + s.rel_tol * fmax(fabs(y0[i]), fabs(y1[i]));
        let r = err[i] / sc;
        acc += r * r;
    }
    sqrt(acc / N as f64)
}

fn initial_step<const N: usize, F>(f: &F, s: &Settings, t: f64, y: &[f64; N], f0: &[f64; N], span: f64) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let d0 = error_norm(s, y, y, y);
    let d1 = error_norm(s, y, y, f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = fmin(fmin(h0, s.max_step), span);
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let f1 = f(t + h0, &y1);
    let mut df = [0.0; N];
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = error_norm(s, y, y, &df) / h0;
    let h1 = if fmax(d1, d2) <= 1e-15 {
        fmax(1e-6, h0 * 1e-3)
    } else {
        pow(0.01 / fmax(d1, d2), 1.0 / 5.0)
    };
    fmin(fmin(100.0 * h0, h1), fmin(s.max_step, span))
}

/// Integrate `y' = f(t, y)` forward from `t0` to `t_end`, stopping at the
/// earliest event. `on_step` sees the initial point and every accepted step
/// (including the final, possibly shortened one).
pub(crate) fn solve<const N: usize, F, R>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    s: &Settings,
    events: &[Event<'_, N>],
    mut on_step: R,
) -> Result<Finish<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    R: FnMut(f64, &[f64; N]),
{
    let mut t = t0;
    let mut y = y0;
    on_step(t, &y);
    if t_end <= t0 {
        return Ok(Finish { t, y, stop: Stop::End });
    }
    let mut k1 = f(t, &y);
    let mut h = initial_step(f, s, t, &y, &k1, t_end - t0);
    let h_min = s.max_step * 1e-12;
    let mut err_old = 1e-4_f64;
    let mut rejected = false;
    let mut steps = 0u64;

    loop {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Numerical("step budget exhausted"));
        }
        let remaining = t_end - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let step = dp_step(f, t, &y, &k1, h);
        let mut err = error_norm(s, &y, &step.y, &step.err);
        if !err.is_finite() {
            err = 1e10;
        }
        if err > 1.0 {
            let factor = fmax(MIN_FACTOR, SAFETY * pow(err, -ALPHA));
            h *= factor;
            rejected = true;
            if h < h_min {
                return Err(Error::StiffnessFailure { at: t, step: h });
            }
            continue;
        }

        let t_new = if last { t_end } else { t + h };
        // Events over [t, t_new].
        let mut hit: Option<(usize, f64, [f64; N])> = None;
        for (idx, ev) in events.iter().enumerate() {
            if let Some(armed) = ev.armed {
                if !armed(t_new, &step.y) {
                    continue;
                }
            }
            let before = (ev.g)(t, &y);
            let after = (ev.g)(t_new, &step.y);
            if !ev.fires(before, after) {
                continue;
            }
            let (te, ye) = localise(f, ev, t, &y, &k1, t_new - t, before, after, &step.y, s.event_tol);
            if hit.as_ref().is_none_or(|(_, th, _)| te < *th) {
                hit = Some((idx, te, ye));
            }
        }
        if let Some((idx, te, ye)) = hit {
            on_step(te, &ye);
            return Ok(Finish { t: te, y: ye, stop: Stop::Event(idx) });
        }

        t = t_new;
        y = step.y;
        k1 = step.k7;
        on_step(t, &y);
        if y.iter().any(|v| !v.is_finite() || fabs(*v) > BLOW_UP) {
            return Ok(Finish { t, y, stop: Stop::BlowUp });
        }
        if last {
            return Ok(Finish { t, y, stop: Stop::End });
        }

        let mut factor = SAFETY * pow(fmax(err, 1e-10), -ALPHA) * pow(err_old, BETA);
        factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
        if rejected {
            factor = fmin(factor, 1.0);
        }
        err_old = fmax(err, 1e-4);
        rejected = false;
        h = fmin(h * factor, s.max_step);
    }
}

#[allow(clippy::too_many_arguments)]
fn localise<const N: usize, F>(
    f: &F,
    ev: &Event<'_, N>,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    g_a: f64,
    g_b: f64,
    y_b: &[f64; N],
    tol: f64,
) -> (f64, [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let (mut a, mut fa) = (0.0, g_a);
    let (mut b, mut fb) = (h, g_b);
    let mut yb = *y_b;
    if fabs(fb) <= tol {
        return (t + b, yb);
    }
    // Illinois: side retained twice in a row has its value halved.
    let mut side = 0i8;
    for _ in 0..200 {
        let mut c = b - fb * (b - a) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let yc = dp_step(f, t, y, k1, c).y;
        let fc = (ev.g)(t + c, &yc);
        if fabs(fc) <= tol {
            return (t + c, yc);
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            yb = yc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if b - a <= 4.0 * f64::EPSILON * (fabs(t) + h) {
            break;
        }
    }
    (t + b, yb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::{cos, exp, sin};

    fn settings(rel: f64) -> Settings {
        Settings { rel_tol: rel, abs_tol: rel * 1e-2, max_step: 1.0, event_tol: 1e-12 }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let f = |_t: f64, y: &[f64; 1]| [-2.0 * y[0]];
        let fin = solve(&f, 0.0, [1.0], 3.0, &settings(1e-10), &[], |_, _| {}).unwrap();
        assert_eq!(fin.stop, Stop::End);
        assert_eq!(fin.t, 3.0);
        assert!((fin.y[0] - exp(-6.0)).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_event_at_quarter_period() {
        // x = cos t, v = −sin t; x falls through zero at t = π/2.
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let g = |_t: f64, y: &[f64; 2]| y[0];
        let ev = [Event { g: &g, direction: Direction::Falling, armed: None }];
        let fin = solve(&f, 0.0, [1.0, 0.0], 10.0, &settings(1e-12), &ev, |_, _| {}).unwrap();
        assert_eq!(fin.stop, Stop::Event(0));
        assert!((fin.t - core::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!(fin.y[0].abs() <= 1e-12);
        assert!((fin.y[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn rising_event_ignores_falling_crossings() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let g = |_t: f64, y: &[f64; 2]| y[0];
        let ev = [Event { g: &g, direction: Direction::Rising, armed: None }];
        let fin = solve(&f, 0.0, [1.0, 0.0], 10.0, &settings(1e-12), &ev, |_, _| {}).unwrap();
        assert!((fin.t - 1.5 * core::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn samples_are_strictly_increasing() {
        let f = |t: f64, _y: &[f64; 1]| [cos(t)];
        let mut ts = alloc::vec::Vec::new();
        let fin = solve(&f, 0.0, [0.0], 20.0, &settings(1e-9), &[], |t, _| ts.push(t)).unwrap();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!((fin.y[0] - sin(20.0)).abs() < 1e-8);
    }
}
