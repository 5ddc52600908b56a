use std::collections::BTreeMap;

use serde::Serialize;

use super::{ReebGraph, VertexType};

#[derive(Debug, Clone, Default, Serialize, PartialEq, Eq)]
pub struct TypeCount {
    pub bottom: usize,
    pub top: usize,
    pub pass: usize,
    pub merge: usize,
    pub split: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexCheck {
    pub id: usize,
    pub vtype: VertexType,
    pub order: usize,
    pub up: usize,
    pub down: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub is_tree: bool,
    pub open_edges: usize,
    pub vertices: Vec<VertexCheck>,
    pub counts: TypeCount,
    /// `#(1/2) = #(1/0) - 1`
    pub merge_identity: bool,
    /// `#(2/1) = #(0/1)`
    pub split_identity: bool,
    /// Every level component carries at most one critical point: no two
    /// vertices joined by an edge of zero height.
    pub single_critical_levels: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn validate(graph: &ReebGraph) -> ValidationReport {
    let mut failures = Vec::new();
    let nv = graph.vertices.len();
    let open_edges = graph.edges.iter().filter(|e| e.is_open()).count();
    if open_edges != 1 {
        failures.push(format!("{open_edges} open edges"));
    }
    let closed = graph.edges.len() - open_edges;
    let mut is_tree = nv > 0 && closed + 1 == nv;
    if !is_tree {
        failures.push(format!("{closed} closed edges for {nv} vertices"));
    }
    // connectivity
    if nv > 0 {
        let mut seen = vec![false; nv];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for e in graph.incident(v) {
                if let Some(w) = graph.edges[e].other_end(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            is_tree = false;
            failures.push("graph is disconnected".into());
        }
    }

    let mut by_type: BTreeMap<VertexType, usize> = BTreeMap::new();
    let mut vertices = Vec::with_capacity(nv);
    for v in &graph.vertices {
        let up = graph.edges_above(v.id).len();
        let down = graph.edges_below(v.id).len();
        let ok = VertexType::from_degrees(up, down) == Some(v.vtype);
        if !ok {
            failures.push(format!("vertex {} typed {} has {up} edges above and {down} below", v.id, v.vtype));
        }
        *by_type.entry(v.vtype).or_default() += 1;
        vertices.push(VertexCheck {
            id: v.id,
            vtype: v.vtype,
            order: v.vtype.order(),
            up,
            down,
            ok,
        });
    }
    for e in &graph.edges {
        if e.z_hi <= e.z_lo {
            failures.push(format!("edge {} has empty range [{}, {}]", e.id, e.z_lo, e.z_hi));
        }
        for (end, z) in [(e.lower, e.z_lo), (e.upper, e.z_hi)] {
            if let Some(v) = end {
                if graph.vertices[v].z != z {
                    failures.push(format!("edge {} does not abut vertex {v}", e.id));
                }
            }
        }
    }
    let get = |t| by_type.get(&t).copied().unwrap_or(0);
    let counts = TypeCount {
        bottom: get(VertexType::Bottom),
        top: get(VertexType::Top),
        pass: get(VertexType::Pass),
        merge: get(VertexType::Merge),
        split: get(VertexType::Split),
    };
    let merge_identity = counts.merge + 1 == counts.bottom;
    let split_identity = counts.split == counts.top;
    if !merge_identity {
        failures.push(format!("#(1/2) = {} but #(1/0) - 1 = {}", counts.merge, counts.bottom as i64 - 1));
    }
    if !split_identity {
        failures.push(format!("#(2/1) = {} but #(0/1) = {}", counts.split, counts.top));
    }
    let tol = 1e-12;
    let single_critical_levels = graph
        .edges
        .iter()
        .filter(|e| e.lower.is_some() && e.upper.is_some())
        .all(|e| e.z_hi - e.z_lo > tol);
    if !single_critical_levels {
        failures.push("two critical points on one level component".into());
    }

    ValidationReport {
        is_tree,
        open_edges,
        vertices,
        counts,
        merge_identity,
        split_identity,
        single_critical_levels,
        failures,
    }
}
