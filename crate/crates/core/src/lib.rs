//! Reeb-graph reduction and multi-scale simulation of perturbed Hamiltonian
//! systems.
//!
//! The crate is split along the pipeline: [`morse`] locates and classifies
//! critical points, [`reeb`] builds the graph of level-set components,
//! [`coeffs`] tabulates edge-averaged drift and diffusion, [`sde`] simulates
//! the full system, [`graphdiff`] the reduced diffusion on the graph and
//! [`limit`] the deterministic limit with random branching.

pub mod coeffs;
pub mod graphdiff;
pub mod limit;
pub mod models;
pub mod morse;
pub mod reeb;
pub mod rng;
pub mod sde;
pub mod stats;

pub use morse::{BoundingBox, ScalarFieldModel};
pub use reeb::{DomainSide, EdgeId, GraphPoint, ReebGraph, VertexId};
