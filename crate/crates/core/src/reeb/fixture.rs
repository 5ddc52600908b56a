//! A hand-built graph with fifteen vertices covering every vertex type:
//! six minima, five `1/2` merges, two `1/1` passes, one maximum and one
//! `2/1` split. Vertices are labelled `O1..O15`, edges `I1..I15`.

use super::{ReebEdge, ReebGraph, ReebVertex, VertexType};

/// `(label, z, type)`
const VERTICES: [(&str, f64, VertexType); 15] = [
    ("O1", 10.0, VertexType::Merge),
    ("O2", 8.0, VertexType::Merge),
    ("O3", 6.0, VertexType::Pass),
    ("O4", 4.0, VertexType::Merge),
    ("O5", 1.0, VertexType::Bottom),
    ("O6", 2.0, VertexType::Bottom),
    ("O7", 5.0, VertexType::Split),
    ("O8", 7.0, VertexType::Top),
    ("O9", 4.0, VertexType::Pass),
    ("O10", 3.0, VertexType::Merge),
    ("O11", 1.0, VertexType::Bottom),
    ("O12", 2.0, VertexType::Bottom),
    ("O13", 6.0, VertexType::Merge),
    ("O14", 1.0, VertexType::Bottom),
    ("O15", 2.0, VertexType::Bottom),
];

/// `(label, lower, upper)` by vertex number; `0` marks the open end.
const EDGES: [(&str, usize, usize); 15] = [
    ("I1", 1, 0),
    ("I2", 2, 1),
    ("I3", 13, 1),
    ("I4", 3, 2),
    ("I5", 4, 3),
    ("I6", 5, 4),
    ("I7", 7, 2),
    ("I8", 7, 8),
    ("I9", 9, 7),
    ("I10", 10, 9),
    ("I11", 11, 10),
    ("I12", 12, 10),
    ("I13", 6, 4),
    ("I14", 14, 13),
    ("I15", 15, 13),
];

pub const Z_MAX: f64 = 12.0;

pub fn figure2() -> ReebGraph {
    let vertices = VERTICES
        .iter()
        .enumerate()
        .map(|(id, (label, z, t))| ReebVertex {
            id,
            z: *z,
            vtype: *t,
            critical: None,
            label: Some((*label).to_string()),
        })
        .collect::<Vec<_>>();
    let edges = EDGES
        .iter()
        .enumerate()
        .map(|(id, (label, lo, hi))| {
            let lower = Some(lo - 1);
            let upper = (*hi != 0).then(|| hi - 1);
            ReebEdge {
                id,
                lower,
                upper,
                z_lo: vertices[lo - 1].z,
                z_hi: upper.map_or(Z_MAX, |u| vertices[u].z),
                label: Some((*label).to_string()),
            }
        })
        .collect();
    ReebGraph::from_parts(vertices, edges, Z_MAX)
}

/// Vertex id of label `O<n>`.
pub fn vertex(n: usize) -> usize {
    n - 1
}

/// Edge id of label `I<n>`.
pub fn edge(n: usize) -> usize {
    n - 1
}
