use serde::{Deserialize, Serialize};

use super::{CoeffError, EdgeCoefficientTable};
use crate::reeb::{EdgeId, ReebGraph, VertexId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingWeights {
    pub vertex: VertexId,
    /// `(edge, gamma)` for every attached edge.
    pub weights: Vec<(EdgeId, f64)>,
}

impl GluingWeights {
    pub fn gamma(&self, edge: EdgeId) -> Option<f64> {
        self.weights.iter().find(|w| w.0 == edge).map(|w| w.1)
    }
}

/// Least-squares line through the three rows nearest `vz`, evaluated at
/// `vz`. Returns the value and the relative spread of the three samples.
pub fn extrapolate_to_vertex(table: &EdgeCoefficientTable, vz: f64, column: fn(&super::CoefficientRow) -> f64) -> (f64, f64) {
    let rows = table.rows_near(vz, 3);
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.z - vz).collect();
    let ys: Vec<f64> = rows.iter().map(|r| column(r)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let value = my - slope * mx;
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = if value != 0.0 { (hi - lo) / value.abs() } else { f64::INFINITY };
    (value, spread)
}

pub(crate) fn table_for<'a>(tables: &'a [EdgeCoefficientTable], edge: EdgeId) -> Result<&'a EdgeCoefficientTable, CoeffError> {
    tables
        .iter()
        .find(|t| t.edge == edge)
        .ok_or(CoeffError::MissingTable(edge))
}

/// `gamma_ik` as the one-sided limit of `h_k` at every vertex.
pub fn gluing_weights(tables: &[EdgeCoefficientTable], graph: &ReebGraph) -> Result<Vec<GluingWeights>, CoeffError> {
    let mut out = Vec::with_capacity(graph.vertices.len());
    for v in &graph.vertices {
        let mut weights = Vec::new();
        for e in graph.incident(v.id) {
            let t = table_for(tables, e)?;
            let (g, spread) = extrapolate_to_vertex(t, v.z, |r| r.h);
            if graph.is_interior(v.id) && spread > 0.2 {
                return Err(CoeffError::ExtrapolationUnstable {
                    vertex: v.id,
                    edge: e,
                    spread: 100.0 * spread,
                });
            }
            weights.push((e, if graph.is_interior(v.id) { g } else { g.max(0.0) }));
        }
        out.push(GluingWeights { vertex: v.id, weights });
    }
    Ok(out)
}
