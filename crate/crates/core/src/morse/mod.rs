//! Scalar fields, critical points and the structural assumptions the rest of
//! the pipeline relies on.

mod assumptions;
pub mod catalog;
mod critical;
mod field;

pub use assumptions::{check_assumptions, AssumptionReport, AssumptionStatus};
pub use critical::{find_critical_points, CriticalPoint, CriticalSearch};
pub use field::{symplectic_gradient, BoundingBox, Kinetic, ScalarFieldModel, Separable};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorseError {
    #[error("degenerate critical point at {location:?}: smallest |eigenvalue| {min_abs_eigenvalue:.3e}")]
    DegenerateCritical {
        location: Vec<f64>,
        min_abs_eigenvalue: f64,
    },
    #[error("two critical points share the value {value:.12} (at {first:?} and {second:?})")]
    NonDistinctCriticalValues {
        value: f64,
        first: Vec<f64>,
        second: Vec<f64>,
    },
    #[error("critical point at {location:?} lies on the bounding box boundary")]
    CriticalOnBoundary { location: Vec<f64> },
    #[error("sublevel set {{H <= {z_max}}} reaches the bounding box (min boundary value {boundary_min})")]
    NotProper { z_max: f64, boundary_min: f64 },
    #[error("symplectic gradient needs an even dimension, got {dim}")]
    OddDimension { dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}
