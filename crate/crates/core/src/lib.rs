//! Wheel-odometry positioning through GNSS outages.
//!
//! The physical model ([`deadreckon`]) integrates rear-axle wheel speeds into
//! per-second displacements. A small recurrent network ([`model`]) learns the
//! per-second displacement error against GNSS ([`geodesy`]) from one second
//! of four-wheel speed history ([`dataset`]), and [`eval`] measures how much
//! the learned correction reduces accumulated error over simulated outages.

pub mod dataset;
pub mod deadreckon;
pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod geodesy;
pub mod model;

pub use error::{Error, Result};
