use serde::{Deserialize, Serialize};

use super::gluing::{extrapolate_to_vertex, table_for};
use super::{CoeffError, EdgeCoefficientTable, GluingWeights};
use crate::reeb::{EdgeId, GraphPoint, Location, ReebGraph, VertexId, VertexType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRole {
    pub edge: EdgeId,
    /// Averaged flow leaves the vertex along this edge.
    pub exit: bool,
    /// `b_hat` extrapolated to the vertex.
    pub b_hat: f64,
    pub b_hat_se: f64,
    pub gamma: f64,
    /// Branching probability; `0` for entrance edges.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexClassification {
    pub vertex: VertexId,
    pub vtype: VertexType,
    pub essential: bool,
    pub edges: Vec<EdgeRole>,
}

impl VertexClassification {
    pub fn exits(&self) -> impl Iterator<Item = &EdgeRole> {
        self.edges.iter().filter(|r| r.exit)
    }

    pub fn role(&self, edge: EdgeId) -> Option<&EdgeRole> {
        self.edges.iter().find(|r| r.edge == edge)
    }
}

fn significant(value: f64, se: f64) -> bool {
    value.abs() > 3.0 * se
}

/// Entrance/exit edges, essential flags and branching probabilities.
pub fn classify_vertices(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    gluing: &[GluingWeights],
) -> Result<Vec<VertexClassification>, CoeffError> {
    let mut out = Vec::with_capacity(graph.vertices.len());
    for v in &graph.vertices {
        let interior = graph.is_interior(v.id);
        let mut edges = Vec::new();
        for e in graph.incident(v.id) {
            let t = table_for(tables, e)?;
            let (b_hat, _) = extrapolate_to_vertex(t, v.z, |r| r.b_hat);
            let near = t.rows_near(v.z, 1)[0];
            let se = near.b_hat_se;
            if interior {
                if !significant(b_hat, se) {
                    return Err(CoeffError::AssumptionA6Violated {
                        vertex: v.id,
                        edge: e,
                        b_hat,
                        se,
                    });
                }
                let edge = graph.edge(e);
                let window = 0.25 * (edge.z_hi - edge.z_lo);
                let flips = t
                    .rows
                    .iter()
                    .filter(|r| (r.z - v.z).abs() <= window)
                    .any(|r| significant(r.b_hat, r.b_hat_se) && r.b_hat.signum() != b_hat.signum());
                if flips {
                    return Err(CoeffError::AmbiguousSign { vertex: v.id, edge: e });
                }
            }
            // direction from the nearest row that resolves the sign
            let near_sign = t
                .rows_near(v.z, t.rows.len())
                .into_iter()
                .find(|r| significant(r.b_hat, r.b_hat_se))
                .map_or(b_hat.signum(), |r| r.b_hat.signum());
            let velocity = t.sign() * if interior { b_hat } else { near_sign };
            let exit = velocity * graph.edge(e).direction_from(v.id) > 0.0;
            let gamma = gluing
                .iter()
                .find(|g| g.vertex == v.id)
                .and_then(|g| g.gamma(e))
                .unwrap_or(f64::NAN);
            edges.push(EdgeRole {
                edge: e,
                exit,
                b_hat,
                b_hat_se: se,
                gamma,
                probability: 0.0,
            });
        }
        let total: f64 = edges.iter().filter(|r| r.exit).map(|r| r.b_hat.abs()).sum();
        let n_exit = edges.iter().filter(|r| r.exit).count();
        for r in edges.iter_mut().filter(|r| r.exit) {
            r.probability = if n_exit == 1 { 1.0 } else { r.b_hat.abs() / total };
        }
        out.push(VertexClassification {
            vertex: v.id,
            vtype: v.vtype,
            essential: interior && n_exit == 2,
            edges,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableTarget {
    /// Exterior vertex, or `None` for an attracting zero inside `edge`.
    pub vertex: Option<VertexId>,
    pub edge: EdgeId,
    pub z: f64,
    pub probability: f64,
    /// Essential vertices passed on the way, in order.
    pub essential: Vec<VertexId>,
    /// Edge chosen at each essential vertex.
    pub branches: Vec<(VertexId, EdgeId)>,
}

impl StableTarget {
    pub fn point(&self) -> GraphPoint {
        match self.vertex {
            Some(v) => GraphPoint {
                location: Location::Vertex(v),
                z: self.z,
            },
            None => GraphPoint::on_edge(self.edge, self.z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableSet {
    pub start: GraphPoint,
    pub targets: Vec<StableTarget>,
}

impl StableSet {
    pub fn total_probability(&self) -> f64 {
        self.targets.iter().map(|t| t.probability).sum()
    }

    pub fn target_vertex(&self, v: VertexId) -> Option<&StableTarget> {
        self.targets.iter().find(|t| t.vertex == Some(v))
    }
}

impl EdgeCoefficientTable {
    /// Zeros of `b_hat` strictly inside the tabulated range, located between
    /// consecutive rows whose values differ in sign beyond 3 standard errors.
    pub fn zeros(&self) -> Vec<f64> {
        let sig: Vec<_> = self.rows.iter().filter(|r| significant(r.b_hat, r.b_hat_se)).collect();
        let mut out = Vec::new();
        for w in sig.windows(2) {
            if w[0].b_hat.signum() != w[1].b_hat.signum() {
                let (mut a, mut b) = (w[0].z, w[1].z);
                let fa = self.b_hat(a);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if self.b_hat(m).signum() == fa.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        out
    }

    /// Signed `dz/dt` of the unperturbed-by-`beta` averaged flow.
    pub fn velocity(&self, z: f64) -> f64 {
        self.b_bar(z)
    }
}

struct Walker<'a> {
    graph: &'a ReebGraph,
    tables: &'a [EdgeCoefficientTable],
    classes: &'a [VertexClassification],
    targets: Vec<StableTarget>,
    steps: usize,
}

impl Walker<'_> {
    fn at_vertex(&mut self, v: VertexId, came: Option<EdgeId>, p: f64, ess: Vec<VertexId>, br: Vec<(VertexId, EdgeId)>) -> Result<(), CoeffError> {
        self.steps += 1;
        if self.steps > 8 * (self.graph.edges.len() + 1) {
            return Err(CoeffError::CycleDetected);
        }
        let z = self.graph.vertex(v).z;
        if !self.graph.is_interior(v) {
            let edge = came.unwrap_or_else(|| self.graph.incident(v)[0]);
            self.targets.push(StableTarget {
                vertex: Some(v),
                edge,
                z,
                probability: p,
                essential: ess,
                branches: br,
            });
            return Ok(());
        }
        let class = &self.classes[v];
        let exits: Vec<EdgeRole> = class.exits().cloned().collect();
        if exits.is_empty() || exits.iter().any(|r| Some(r.edge) == came) {
            return Err(CoeffError::CycleDetected);
        }
        for r in exits {
            let (mut ess, mut br) = (ess.clone(), br.clone());
            if class.essential {
                ess.push(v);
                br.push((v, r.edge));
            }
            self.along_edge(r.edge, z, Some(v), p * r.probability, ess, br)?;
        }
        Ok(())
    }

    fn along_edge(&mut self, e: EdgeId, z: f64, from: Option<VertexId>, p: f64, ess: Vec<VertexId>, br: Vec<(VertexId, EdgeId)>) -> Result<(), CoeffError> {
        let t = table_for(self.tables, e)?;
        let edge = self.graph.edge(e);
        let dir = match from {
            Some(v) => edge.direction_from(v),
            None => t.velocity(z).signum(),
        };
        let ahead = t.zeros().into_iter().filter(|&r| (r - z) * dir > 0.0);
        let first = if dir > 0.0 {
            ahead.fold(f64::INFINITY, f64::min)
        } else {
            ahead.fold(f64::NEG_INFINITY, f64::max)
        };
        if first.is_finite() {
            self.targets.push(StableTarget {
                vertex: None,
                edge: e,
                z: first,
                probability: p,
                essential: ess,
                branches: br,
            });
            return Ok(());
        }
        let next = if dir > 0.0 { edge.upper } else { edge.lower };
        match next {
            Some(v) => self.at_vertex(v, Some(e), p, ess, br),
            None => Err(CoeffError::AssumptionA8Violated { z }),
        }
    }
}

/// Targets of the averaged flow from `y`, each weighted by the product of the
/// branching probabilities met on the way.
pub fn stable_set(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    classes: &[VertexClassification],
    y: GraphPoint,
) -> Result<StableSet, CoeffError> {
    let mut w = Walker {
        graph,
        tables,
        classes,
        targets: Vec::new(),
        steps: 0,
    };
    match y.location {
        Location::Vertex(v) => w.at_vertex(v, None, 1.0, Vec::new(), Vec::new())?,
        Location::Edge(e) => w.along_edge(e, y.z, None, 1.0, Vec::new(), Vec::new())?,
    }
    let mut targets: Vec<StableTarget> = Vec::new();
    for t in w.targets {
        match targets
            .iter_mut()
            .find(|u| u.vertex == t.vertex && u.edge == t.edge && (u.z - t.z).abs() < 1e-12)
        {
            Some(u) => u.probability += t.probability,
            None => targets.push(t),
        }
    }
    Ok(StableSet { start: y, targets })
}
