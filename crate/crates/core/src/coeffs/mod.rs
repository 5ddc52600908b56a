//! Edge-averaged coefficients on the Reeb graph: Monte Carlo volume tables,
//! gluing weights, vertex classification and stable sets of the averaged
//! flow.

mod classify;
mod export;
mod gluing;
mod interp;
mod synthetic;
mod table;

use thiserror::Error;

use crate::models::{DiffusionModel, VectorFieldModel};
use crate::reeb::{EdgeId, VertexId};

pub use classify::{classify_vertices, stable_set, EdgeRole, StableSet, StableTarget, VertexClassification};
pub use export::{tables_to_csv, CoefficientSidecar};
pub use gluing::{extrapolate_to_vertex, gluing_weights, GluingWeights};
pub use interp::Pchip;
pub use synthetic::synthetic_tables;
pub use table::{tabulate_edges, z_grid, CoefficientRow, EdgeCoefficientTable, RawRow, TabulationSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoeffError {
    #[error("graph carries no field or projection labels")]
    NoProjection,
    #[error("no coefficient table for edge {0}")]
    MissingTable(EdgeId),
    #[error("h = {h:.3e} is not positive on edge {edge} at z = {z:.6}")]
    DegenerateDiffusion { edge: EdgeId, z: f64, h: f64 },
    #[error("domain of edge {edge} is empty or too thin at z = {z:.6}")]
    EmptyDomain { edge: EdgeId, z: f64 },
    #[error("extrapolation to vertex {vertex} along edge {edge} spreads by {spread:.1}%")]
    ExtrapolationUnstable { vertex: VertexId, edge: EdgeId, spread: f64 },
    #[error("b_hat = {b_hat:.3e} (se {se:.1e}) on edge {edge} is zero within error at interior vertex {vertex}")]
    AssumptionA6Violated { vertex: VertexId, edge: EdgeId, b_hat: f64, se: f64 },
    #[error("b_hat changes sign near vertex {vertex} on edge {edge}")]
    AmbiguousSign { vertex: VertexId, edge: EdgeId },
    #[error("averaged flow escapes up the open edge from z = {z:.6}")]
    AssumptionA8Violated { z: f64 },
    #[error("flow following did not terminate")]
    CycleDetected,
}

/// The non-Hamiltonian parts of the perturbation: diffusion `a2` and the
/// drifts `b` and `beta`.
#[derive(Debug, Clone)]
pub struct PerturbationModels {
    pub a2: DiffusionModel,
    pub b: VectorFieldModel,
    pub beta: VectorFieldModel,
}

impl PerturbationModels {
    pub fn new(a2: DiffusionModel, b: VectorFieldModel, beta: VectorFieldModel) -> Self {
        Self { a2, b, beta }
    }
}
