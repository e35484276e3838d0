//! Command line, parallel sweeps and file formats for `pendulum-core`.

pub mod cli;
pub mod format;
pub mod grid;
pub mod parallel;
pub mod portrait;
pub mod verify;
