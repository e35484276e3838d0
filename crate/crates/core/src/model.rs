//! The vector field, its equilibria and the closed-form geometry around them.
//!
//! Angles live on the universal cover of the cylinder: `φ` is never wrapped,
//! so a running trajectory keeps counting turns. Use
//! [`PhaseState::reduced`] when a point in the main interval is wanted.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::ops::RangeInclusive;

use libm::{asin, cos, sin, sqrt};

use crate::error::{Error, Result};

/// `|sin φ − β|` below which a point on the axis is treated as an equilibrium.
pub(crate) const EQUILIBRIUM_TOL: f64 = 1e-12;

/// Default half-width of the `OnG` / `OnAxis` bands in [`classify_region`].
pub const REGION_TOL: f64 = 1e-9;

/// Drive `β` and damping `γ` of one field instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !beta.is_finite() || !gamma.is_finite() {
            return Err(Error::Domain("beta and gamma must be finite"));
        }
        if beta < 0.0 {
            return Err(Error::Domain("beta must be non-negative"));
        }
        if gamma < 0.0 {
            return Err(Error::Domain("gamma must be non-negative"));
        }
        Ok(Self { beta, gamma })
    }

    /// `φ₀ = arcsin β`, defined while equilibria exist (`β ≤ 1`).
    pub fn phi0(&self) -> Option<f64> {
        (self.beta <= 1.0).then(|| asin(self.beta))
    }

    /// Left end of the main interval `[−π − φ₀, π − φ₀]`; `−π` when `β > 1`.
    pub fn main_interval(&self) -> (f64, f64) {
        let phi0 = self.phi0().unwrap_or(0.0);
        (-PI - phi0, PI - phi0)
    }

    /// Height of line L, `z = (β + 1)/γ`. Above it every vector points down.
    pub fn line_l(&self) -> f64 {
        (self.beta + 1.0) / self.gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub phi: f64,
    pub z: f64,
}

impl PhaseState {
    pub const fn new(phi: f64, z: f64) -> Self {
        Self { phi, z }
    }

    /// The cylinder representative with `φ ∈ [origin, origin + 2π)`.
    pub fn reduced(&self, origin: f64) -> Self {
        let turns = libm::floor((self.phi - origin) / TAU);
        Self { phi: self.phi - turns * TAU, z: self.z }
    }

    /// Same point of the cylinder: `z` equal and `φ` apart by a whole number
    /// of turns (both to `tol`).
    pub fn cylinder_equivalent(&self, other: &Self, tol: f64) -> bool {
        let d = (self.phi - other.phi) / TAU;
        libm::fabs(d - libm::round(d)) * TAU <= tol && libm::fabs(self.z - other.z) <= tol
    }

    pub(crate) fn distance(&self, other: &Self) -> f64 {
        libm::hypot(self.phi - other.phi, self.z - other.z)
    }
}

/// Right-hand side `(dφ/dt, dz/dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    pub dphi: f64,
    pub dz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Saddle,
    /// Attracting point (`γ > 0`); a focus or a node depending on the
    /// sign of [`FixedPoint::discriminant`].
    Sink,
    /// Conservative case `γ = 0`.
    Center,
    /// `β = 1`: saddle `A_{k+1}` and sink `B_k` merged.
    SaddleNode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub phi: f64,
    pub kind: FixedPointKind,
    /// Index `n` of `φ_n = nπ + (−1)ⁿ φ₀`.
    pub index: i64,
    /// Unstable and stable separatrix slopes `(λ₁, λ₂)`, saddles only.
    pub slopes: Option<(f64, f64)>,
    /// `γ²/4 − cos φ` of the linearisation `λ² + γλ + cos φ = 0`.
    /// Negative at a sink means a focus, non-negative a node.
    pub discriminant: f64,
}

impl FixedPoint {
    pub fn state(&self) -> PhaseState {
        PhaseState::new(self.phi, 0.0)
    }
}

/// Slope `dz/dφ` of the trajectory through a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Finite(f64),
    /// On the axis away from equilibria, trajectories cross vertically.
    Infinite,
    /// At an equilibrium.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `0 < z < G(φ)`.
    Lambda1,
    /// `G(φ) < z < 0`.
    Lambda2,
    /// `z > 0` above G.
    Lambda3,
    /// `z < 0` below G.
    Lambda4,
    OnG,
    OnAxis,
    AtFixedPoint,
}

pub fn rhs(state: PhaseState, params: ModelParams) -> FieldVector {
    FieldVector {
        dphi: state.z,
        dz: params.beta - sin(state.phi) - params.gamma * state.z,
    }
}

fn is_equilibrium(state: PhaseState, params: ModelParams) -> bool {
    state.z == 0.0 && libm::fabs(params.beta - sin(state.phi)) <= EQUILIBRIUM_TOL
}

/// `dz/dφ = (β − sin φ)/z − γ`.
pub fn slope_field(state: PhaseState, params: ModelParams) -> Slope {
    if state.z == 0.0 {
        if is_equilibrium(state, params) {
            Slope::Undefined
        } else {
            Slope::Infinite
        }
    } else {
        Slope::Finite((params.beta - sin(state.phi)) / state.z - params.gamma)
    }
}

/// Equilibria `(φ_n, 0)` for every `n` in `n_range`.
///
/// Empty when `β > 1`. At `β = 1` the coincident pairs `φ_{2k} = φ_{2k+1}`
/// are reported once, as a saddle-node carrying the smaller index.
pub fn equilibria(params: ModelParams, n_range: RangeInclusive<i64>) -> Vec<FixedPoint> {
    let Some(phi0) = params.phi0() else {
        return Vec::new();
    };
    let merged = params.beta == 1.0;
    let mut out: Vec<FixedPoint> = Vec::new();
    for n in n_range {
        let phi = fixed_point_phi(n, phi0);
        if merged {
            if out.last().is_some_and(|p| libm::fabs(p.phi - phi) <= 1e-12) {
                continue;
            }
            out.push(FixedPoint {
                phi,
                kind: FixedPointKind::SaddleNode,
                index: n,
                slopes: None,
                discriminant: params.gamma * params.gamma / 4.0,
            });
            continue;
        }
        let discriminant = params.gamma * params.gamma / 4.0 - cos(phi);
        let (kind, slopes) = if n.rem_euclid(2) == 1 {
            (FixedPointKind::Saddle, Some(saddle_slopes(params.gamma, phi0)))
        } else if params.gamma > 0.0 {
            (FixedPointKind::Sink, None)
        } else {
            (FixedPointKind::Center, None)
        };
        out.push(FixedPoint { phi, kind, index: n, slopes, discriminant });
    }
    out
}

/// `φ_n = nπ + (−1)ⁿ φ₀`.
pub fn fixed_point_phi(n: i64, phi0: f64) -> f64 {
    let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    n as f64 * PI + sign * phi0
}

/// Saddle `A_k` at `φ_{2k−1}`.
pub fn saddle(params: ModelParams, k: i64) -> Result<FixedPoint> {
    if params.beta >= 1.0 {
        return Err(Error::Domain("saddles exist only for beta < 1"));
    }
    let n = 2 * k - 1;
    Ok(equilibria(params, n..=n)[0])
}

/// Sink (or centre) `B_k` at `φ_{2k}`.
pub fn sink(params: ModelParams, k: i64) -> Result<FixedPoint> {
    if params.beta >= 1.0 {
        return Err(Error::Domain("sinks exist only for beta < 1"));
    }
    let n = 2 * k;
    Ok(equilibria(params, n..=n)[0])
}

fn saddle_slopes(gamma: f64, phi0: f64) -> (f64, f64) {
    let half = gamma / 2.0;
    let root = sqrt(half * half + cos(phi0));
    (-half + root, -half - root)
}

/// Separatrix slopes `(λ₁, λ₂)` at the saddles.
pub fn separatrix_slopes(params: ModelParams) -> Result<(f64, f64)> {
    if params.beta >= 1.0 {
        return Err(Error::Domain("separatrix slopes need a saddle (beta < 1)"));
    }
    Ok(saddle_slopes(params.gamma, asin(params.beta)))
}

/// The z-nullcline `G: z = (β − sin φ)/γ`.
pub fn curve_g(phi: f64, params: ModelParams) -> Result<f64> {
    if params.gamma == 0.0 {
        return Err(Error::Domain("curve G needs gamma > 0"));
    }
    Ok((params.beta - sin(phi)) / params.gamma)
}

/// Which of Λ₁…Λ₄ contains `state`, with `tol`-wide bands for G and the axis.
pub fn classify_region(state: PhaseState, params: ModelParams, tol: f64) -> Result<Region> {
    let g = curve_g(state.phi, params)?;
    let z = state.z;
    let on_axis = libm::fabs(z) <= tol;
    if on_axis && libm::fabs(params.beta - sin(state.phi)) <= tol {
        return Ok(Region::AtFixedPoint);
    }
    if on_axis {
        return Ok(Region::OnAxis);
    }
    if libm::fabs(z - g) <= tol {
        return Ok(Region::OnG);
    }
    Ok(match (z > 0.0, z < g) {
        (true, true) => Region::Lambda1,
        (true, false) => Region::Lambda3,
        (false, false) => Region::Lambda2,
        (false, true) => Region::Lambda4,
    })
}

fn field_norm_sq(state: PhaseState, params: ModelParams) -> Result<f64> {
    let v = rhs(state, params);
    let n = v.dphi * v.dphi + v.dz * v.dz;
    if n == 0.0 {
        return Err(Error::Domain("rotation rate is undefined at an equilibrium"));
    }
    Ok(n)
}

/// `dθ/dγ = −z² / (z² + Q²)`: the field turns clockwise as damping grows.
pub fn rotation_rate_gamma(state: PhaseState, params: ModelParams) -> Result<f64> {
    let n = field_norm_sq(state, params)?;
    Ok(-(state.z * state.z) / n)
}

/// `dθ/dβ = z / (z² + Q²)`: counter-clockwise above the axis, clockwise below.
pub fn rotation_rate_beta(state: PhaseState, params: ModelParams) -> Result<f64> {
    let n = field_norm_sq(state, params)?;
    Ok(state.z / n)
}

/// Divergence `∂W/∂φ + ∂Q/∂z`, constant `−γ`.
pub fn divergence(params: ModelParams) -> f64 {
    -params.gamma
}
