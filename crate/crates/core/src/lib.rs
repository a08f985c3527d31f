//! Numerical laboratory for Hörmander-type phase functions.
//!
//! The crate checks the rank/curvature conditions and Bourgain's
//! proportionality condition with exact Taylor jets, traces the level
//! curves `∇_ξφ = v`, builds and certifies straightening maps, runs the
//! `tan` sharpness example, and carries out finitary tube experiments.

pub mod error;
pub mod fit;
pub mod linalg;
pub mod report;
pub mod taylor;

pub mod curve_tracer;
pub mod phase_core;
pub mod straightener;
pub mod tan_example;
pub mod tube_lab;

pub use error::{LabError, Result};
