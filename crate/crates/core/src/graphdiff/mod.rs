//! Diffusion on the Reeb graph: Euler-Maruyama inside edges, excursions
//! through vertex stars resolved by local Dirichlet problems.

mod simulate;
mod star;

use thiserror::Error;

use crate::reeb::{EdgeId, VertexId};

pub use simulate::{simulate_graph_diffusion, GraphDiffusionConfig, GraphPath, VertexExcursion};
pub use star::{mean_exit_time, vertex_exit_distribution, StarField, StarProblem};

/// Cells per star arm.
pub const STAR_CELLS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphDiffError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("vertex {0} is not interior")]
    NotInterior(VertexId),
    #[error("no gluing weights for vertex {0}")]
    MissingGluing(VertexId),
    #[error("star radius {h_v} at vertex {vertex} exceeds half an attached edge")]
    RadiusTooLarge { vertex: VertexId, h_v: f64 },
    #[error("no coefficients on edge {edge} at z = {z:.6}")]
    CoefficientGap { edge: EdgeId, z: f64 },
    #[error("star solve at vertex {vertex} is singular")]
    SolverSingular { vertex: VertexId },
    #[error("mean exit time at vertex {vertex} is not positive and finite")]
    ClockStall { vertex: VertexId },
}
