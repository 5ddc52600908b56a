use super::{CoeffError, EdgeCoefficientTable, RawRow};
use crate::reeb::{DomainSide, ReebGraph};

/// Noise-free tables for graphs without a field, with the averaged flow
/// pointing down on every edge.
///
/// On edges whose domain lies below, `V = z - z_min + 1` where `z_min` is the
/// lowest vertex of the domain, and `b_hat = -V`; on edges toward maxima
/// `V = z_top - z + 1` and `b_hat = V`. `h = V` and `beta_hat = 0`.
pub fn synthetic_tables(graph: &ReebGraph, rows_per_edge: usize) -> Result<Vec<EdgeCoefficientTable>, CoeffError> {
    let n = rows_per_edge.max(4);
    let mut out = Vec::with_capacity(graph.edges.len());
    for e in &graph.edges {
        let domain = graph.domain_edges(e.id);
        let side = graph.domain_side(e.id);
        let zs = domain.iter().chain(std::iter::once(&e.id)).flat_map(|&d| {
            let d = graph.edge(d);
            [Some(d.z_lo), d.upper.map(|_| d.z_hi)]
        });
        let zs: Vec<f64> = zs.flatten().collect();
        let z_min = zs.iter().cloned().fold(f64::INFINITY, f64::min);
        let z_top = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let hi = if e.is_open() { e.z_hi - 0.05 * (e.z_hi - e.z_lo) } else { e.z_hi };
        let rows = (0..=n)
            .map(|k| {
                let z = e.z_lo + (hi - e.z_lo) * k as f64 / n as f64;
                let (v, b) = match side {
                    DomainSide::Below => (z - z_min + 1.0, -(z - z_min + 1.0)),
                    DomainSide::Above => (z_top - z + 1.0, z_top - z + 1.0),
                };
                RawRow {
                    z,
                    volume: v,
                    h: side.sign() * v,
                    b_hat: b,
                    ..Default::default()
                }
            })
            .collect();
        out.push(EdgeCoefficientTable::from_raw(graph, e.id, rows, None)?);
    }
    Ok(out)
}
