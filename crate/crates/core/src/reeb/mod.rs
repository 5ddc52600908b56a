//! Reeb graph of a Morse function: construction from a lattice sweep or from
//! the join tree of a separable potential, vertex typing, validation and the
//! projection `x -> (z, edge)`.

mod build;
mod contour;
mod export;
pub mod fixture;
mod lattice;
mod project;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morse::{CriticalPoint, MorseError, ScalarFieldModel};

pub use build::{build_reeb_grid, build_reeb_separable, SublevelTree};
pub use export::GraphDocument;
pub use lattice::Lattice;
pub use validate::{validate, TypeCount, ValidationReport};

pub type VertexId = usize;
pub type EdgeId = usize;

pub const DEFAULT_VERTEX_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReebError {
    #[error("sweep produced a graph that is not a tree: {0}")]
    NotATree(String),
    #[error("graph vertices do not match critical points near level {level:.6}: {detail}")]
    VertexCountMismatch { level: f64, detail: String },
    #[error("separable lift needs h(p) = |p|^2/2")]
    UnsupportedKinetic,
    #[error("separable lift needs at least two momenta, got {0}")]
    PDimTooSmall(usize),
    #[error("field has no separable structure")]
    NotSeparable,
    #[error("resolution {got} per axis is below the minimum {min}")]
    ResolutionTooLow { got: usize, min: usize },
    #[error("z_max = {z_max} must exceed every critical value (max {max_critical}) and stay below the boundary minimum {boundary_min}")]
    BadCeiling {
        z_max: f64,
        max_critical: f64,
        boundary_min: f64,
    },
    #[error(transparent)]
    Morse(#[from] MorseError),
}

/// `i/j`: `i` attached edges above the vertex level, `j` below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum VertexType {
    #[serde(rename = "1/0")]
    Bottom,
    #[serde(rename = "0/1")]
    Top,
    #[serde(rename = "1/1")]
    Pass,
    #[serde(rename = "1/2")]
    Merge,
    #[serde(rename = "2/1")]
    Split,
}

impl VertexType {
    pub fn from_degrees(up: usize, down: usize) -> Option<Self> {
        Some(match (up, down) {
            (1, 0) => Self::Bottom,
            (0, 1) => Self::Top,
            (1, 1) => Self::Pass,
            (1, 2) => Self::Merge,
            (2, 1) => Self::Split,
            _ => return None,
        })
    }

    pub fn order(self) -> usize {
        match self {
            Self::Bottom | Self::Top => 1,
            Self::Pass => 2,
            Self::Merge | Self::Split => 3,
        }
    }

    pub fn is_exterior(self) -> bool {
        self.order() == 1
    }

    pub const ALL: [VertexType; 5] = [Self::Bottom, Self::Top, Self::Pass, Self::Merge, Self::Split];
}

impl fmt::Display for VertexType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bottom => "1/0",
            Self::Top => "0/1",
            Self::Pass => "1/1",
            Self::Merge => "1/2",
            Self::Split => "2/1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReebVertex {
    pub id: VertexId,
    pub z: f64,
    pub vtype: VertexType,
    pub critical: Option<CriticalPoint>,
    /// Optional display name (fixtures).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReebEdge {
    pub id: EdgeId,
    pub lower: Option<VertexId>,
    pub upper: Option<VertexId>,
    pub z_lo: f64,
    pub z_hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ReebEdge {
    pub fn is_open(&self) -> bool {
        self.upper.is_none()
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_lo && z <= self.z_hi
    }

    pub fn other_end(&self, v: VertexId) -> Option<VertexId> {
        if self.lower == Some(v) {
            self.upper
        } else if self.upper == Some(v) {
            self.lower
        } else {
            None
        }
    }

    /// `+1` if the edge leaves `v` upward, `-1` if downward.
    pub fn direction_from(&self, v: VertexId) -> f64 {
        if self.lower == Some(v) {
            1.0
        } else {
            -1.0
        }
    }
}

/// Which part of `Gamma \ {(z, i)}` the domain `G_i(z)` is taken from: the
/// component not containing the open end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainSide {
    /// `G_i(z) = {H < z}` part; the open end lies above.
    Below,
    /// `G_i(z) = {H > z}` part; edges leading to maxima.
    Above,
}

impl DomainSide {
    /// `dz` velocity = `sign * (flux through the level)`.
    pub fn sign(self) -> f64 {
        match self {
            Self::Below => 1.0,
            Self::Above => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Location {
    Edge(EdgeId),
    Vertex(VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphPoint {
    pub location: Location,
    pub z: f64,
}

impl GraphPoint {
    pub fn on_edge(edge: EdgeId, z: f64) -> Self {
        Self {
            location: Location::Edge(edge),
            z,
        }
    }

    pub fn edge(&self) -> Option<EdgeId> {
        match self.location {
            Location::Edge(e) => Some(e),
            Location::Vertex(_) => None,
        }
    }

    pub fn vertex(&self) -> Option<VertexId> {
        match self.location {
            Location::Vertex(v) => Some(v),
            Location::Edge(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReebGraph {
    pub vertices: Vec<ReebVertex>,
    pub edges: Vec<ReebEdge>,
    pub z_max: f64,
    pub vertex_tol: f64,
    pub(crate) field: Option<ScalarFieldModel>,
    pub(crate) labels: Option<project::Labels>,
}

impl ReebGraph {
    /// A bare graph without a projection (fixtures, imported documents).
    pub fn from_parts(vertices: Vec<ReebVertex>, edges: Vec<ReebEdge>, z_max: f64) -> Self {
        Self {
            vertices,
            edges,
            z_max,
            vertex_tol: DEFAULT_VERTEX_TOL,
            field: None,
            labels: None,
        }
    }

    pub fn field(&self) -> Option<&ScalarFieldModel> {
        self.field.as_ref()
    }

    pub fn has_projection(&self) -> bool {
        self.labels.is_some() && self.field.is_some()
    }

    pub fn vertex(&self, v: VertexId) -> &ReebVertex {
        &self.vertices[v]
    }

    pub fn edge(&self, e: EdgeId) -> &ReebEdge {
        &self.edges[e]
    }

    /// Edges attached to `v`, upper ones first.
    pub fn incident(&self, v: VertexId) -> Vec<EdgeId> {
        let mut up: Vec<EdgeId> = self.edges.iter().filter(|e| e.lower == Some(v)).map(|e| e.id).collect();
        up.extend(self.edges.iter().filter(|e| e.upper == Some(v)).map(|e| e.id));
        up
    }

    pub fn edges_above(&self, v: VertexId) -> Vec<EdgeId> {
        self.edges.iter().filter(|e| e.lower == Some(v)).map(|e| e.id).collect()
    }

    pub fn edges_below(&self, v: VertexId) -> Vec<EdgeId> {
        self.edges.iter().filter(|e| e.upper == Some(v)).map(|e| e.id).collect()
    }

    pub fn open_edge(&self) -> Option<EdgeId> {
        self.edges.iter().find(|e| e.is_open()).map(|e| e.id)
    }

    pub fn count(&self, t: VertexType) -> usize {
        self.vertices.iter().filter(|v| v.vtype == t).count()
    }

    /// Edges reachable from vertex `from` without crossing edge `skip`.
    pub fn subtree_edges(&self, from: Option<VertexId>, skip: EdgeId) -> Vec<EdgeId> {
        let mut out = Vec::new();
        let Some(start) = from else { return out };
        let mut stack = vec![(start, skip)];
        while let Some((v, came)) = stack.pop() {
            for e in self.incident(v) {
                if e == came {
                    continue;
                }
                out.push(e);
                if let Some(w) = self.edges[e].other_end(v) {
                    stack.push((w, e));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Side of `edge` on which `G_i(z)` lives.
    pub fn domain_side(&self, edge: EdgeId) -> DomainSide {
        let e = &self.edges[edge];
        if e.is_open() {
            return DomainSide::Below;
        }
        let above = self.subtree_edges(e.upper, edge);
        if above.iter().any(|&a| self.edges[a].is_open()) {
            DomainSide::Below
        } else {
            DomainSide::Above
        }
    }

    /// Edges whose preimages make up `G_edge(z)` besides the edge itself.
    pub fn domain_edges(&self, edge: EdgeId) -> Vec<EdgeId> {
        let e = &self.edges[edge];
        match self.domain_side(edge) {
            DomainSide::Below => self.subtree_edges(e.lower, edge),
            DomainSide::Above => self.subtree_edges(e.upper, edge),
        }
    }

    /// Vertex at the `G`-side end of the edge (`None` only for an open edge
    /// without lower vertex, which cannot occur for a proper field).
    pub fn domain_vertex(&self, edge: EdgeId) -> Option<VertexId> {
        let e = &self.edges[edge];
        match self.domain_side(edge) {
            DomainSide::Below => e.lower,
            DomainSide::Above => e.upper,
        }
    }

    /// Vertex at the far end from `G`.
    pub fn outer_vertex(&self, edge: EdgeId) -> Option<VertexId> {
        let e = &self.edges[edge];
        match self.domain_side(edge) {
            DomainSide::Below => e.upper,
            DomainSide::Above => e.lower,
        }
    }

    pub fn is_interior(&self, v: VertexId) -> bool {
        !self.vertices[v].vtype.is_exterior()
    }
}
