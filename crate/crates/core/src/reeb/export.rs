use serde::{Deserialize, Serialize};

use super::{ReebEdge, ReebGraph, ReebVertex, VertexType};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VertexRecord {
    pub id: usize,
    pub z: f64,
    #[serde(rename = "type")]
    pub vtype: VertexType,
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeRecord {
    pub id: usize,
    pub lower: Option<usize>,
    pub upper: Option<usize>,
    pub z_lo: f64,
    /// `null` for the open edge
    pub z_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// JSON interchange form of a graph (no projection data).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphDocument {
    pub field: Option<String>,
    pub z_max: f64,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl GraphDocument {
    pub fn from_graph(g: &ReebGraph) -> Self {
        Self {
            field: g.field.as_ref().map(|f| f.name.clone()),
            z_max: g.z_max,
            vertices: g
                .vertices
                .iter()
                .map(|v| VertexRecord {
                    id: v.id,
                    z: v.z,
                    vtype: v.vtype,
                    order: v.vtype.order(),
                    location: v.critical.as_ref().map(|c| c.location.clone()),
                    index: v.critical.as_ref().map(|c| c.index),
                    label: v.label.clone(),
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    id: e.id,
                    lower: e.lower,
                    upper: e.upper,
                    z_lo: e.z_lo,
                    z_hi: (!e.is_open()).then_some(e.z_hi),
                    label: e.label.clone(),
                })
                .collect(),
        }
    }

    pub fn into_graph(self) -> ReebGraph {
        let z_max = self.z_max;
        let vertices = self
            .vertices
            .into_iter()
            .map(|v| ReebVertex {
                id: v.id,
                z: v.z,
                vtype: v.vtype,
                critical: None,
                label: v.label,
            })
            .collect();
        let edges = self
            .edges
            .into_iter()
            .map(|e| ReebEdge {
                id: e.id,
                lower: e.lower,
                upper: e.upper,
                z_lo: e.z_lo,
                z_hi: e.z_hi.unwrap_or(z_max),
                label: e.label,
            })
            .collect();
        ReebGraph::from_parts(vertices, edges, z_max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph document serialises")
    }
}
