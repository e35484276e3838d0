use alloc::boxed::Box;
use core::fmt;

use crate::integrate::TrajectorySegment;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone)]
pub enum Error {
    /// An argument lies outside the region where the operation is defined.
    Domain(&'static str),
    /// The adaptive step collapsed below `max_step · 1e-12`.
    StiffnessFailure { at: f64, step: f64 },
    /// A shot ended without reaching any of the classifying events.
    ClassificationAmbiguous { beta: f64, gamma: f64 },
    /// No running cycle exists: the drive is below the saddle-connection value.
    /// `evidence` is the unstable-manifold shot that fell onto the Φ-axis.
    NoCycle { beta0: f64, evidence: Box<TrajectorySegment> },
    /// The drive sits within tolerance of `β₀`, where the only closed path is
    /// the saddle connection itself.
    Degenerate { beta0: f64 },
    /// Iterative solver failed to converge or left its bracket.
    Numerical(&'static str),
}

impl Error {
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::StiffnessFailure { at, step } => {
                write!(f, "step size underflow (h = {step:e}) at independent variable {at}")
            }
            Error::ClassificationAmbiguous { beta, gamma } => write!(
                f,
                "shot at beta = {beta}, gamma = {gamma} exhausted its span without a classifying event"
            ),
            Error::NoCycle { beta0, .. } => {
                write!(f, "no periodic solution: drive is below the critical value {beta0}")
            }
            Error::Degenerate { beta0 } => write!(
                f,
                "drive is within tolerance of the critical value {beta0}; only the saddle connection exists"
            ),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
