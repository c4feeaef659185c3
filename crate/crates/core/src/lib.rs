//! Rigid motion simulation and spline-based autofocus motion compensation for
//! circular cone-beam CT, with tooling to measure which motion frequencies a
//! given spline node count can recover.

pub mod autofocus;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod motion;
pub mod projector;

pub use error::{Error, Result};
