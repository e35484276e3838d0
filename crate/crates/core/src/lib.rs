//! Phase-plane analysis of the driven, damped pendulum
//!
//! ```text
//! φ'' + γ φ' + sin φ = β
//! ```
//!
//! written as the planar field `φ' = z`, `z' = β − sin φ − γ z` on the
//! cylinder (φ taken mod 2π). The crate locates equilibria, shoots the
//! unstable manifold of the saddle, bisects for the saddle-connection drive
//! `β₀(γ)` that separates pinned from running motion, and finds the running
//! limit cycle through a return map on a section of the cylinder.
//!
//! ```
//! use pendulum_core::{critical_beta, find_limit_cycle, IntegrationControls, ModelParams};
//!
//! let controls = IntegrationControls::default();
//! let c = critical_beta(0.5, 1e-8, &controls)?;
//! let orbit = find_limit_cycle(ModelParams::new(1.2, 0.5)?, 1e-10, &controls)?;
//! assert!(c.beta0 < 1.2 && orbit.period > 0.0);
//! # Ok::<(), pendulum_core::Error>(())
//! ```
//!
//! The crate is `no_std` and needs only `alloc`. IO, the command line and
//! parallel sweeps live in the `pendulum` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod rk;

pub mod connection;
pub mod cycle;
pub mod sweep;

pub mod integrate;
pub mod model;


pub use connection::{critical_beta, gamma_min, shoot_unstable_manifold, CriticalResult, ShootKind, ShootOutcome};
pub use cycle::{find_limit_cycle, poincare_map, verify_no_first_kind_cycle, PeriodicOrbit, ReturnImage};

pub use error::{Error, Result};
pub use integrate::{integrate_graph, integrate_time, Cone, EventSet, IntegrationControls, TerminalEvent, TrajectorySegment};
pub use model::{FieldVector, FixedPoint, FixedPointKind, ModelParams, PhaseState, Region, Slope};
