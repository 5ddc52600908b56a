use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::reeb::{DomainSide, EdgeId, ReebGraph};

fn shell_box(graph: &ReebGraph, edge: EdgeId, z: f64, half: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let e = graph.edge(edge);
    let (lo, hi) = match graph.domain_side(edge) {
        DomainSide::Below => (e.z_lo, z + half),
        DomainSide::Above => (z - half, e.z_hi),
    };
    graph.level_bbox(edge, lo, hi, 2.0)
}

/// A point of the level component `C_edge(z)`, drawn from the `1/|grad H|`
/// surface density: uniform in the shell `|H - z| < half` of that component,
/// then moved onto `H = z` along `grad H`.
pub fn sample_level_point(graph: &ReebGraph, edge: EdgeId, z: f64, half: f64, rng: &mut impl Rng, max_tries: usize) -> Option<Vec<f64>> {
    let field = graph.field()?;
    let (lo, hi) = shell_box(graph, edge, z, half)?;
    let d = lo.len();
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    for _ in 0..max_tries {
        for i in 0..d {
            x[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
        }
        let h = field.value(&x);
        if (h - z).abs() >= half || graph.edge_at(&x, h) != edge {
            continue;
        }
        for _ in 0..20 {
            let err = field.value(&x) - z;
            if err.abs() < 1e-13 * z.abs().max(1.0) {
                break;
            }
            field.gradient(&x, &mut g);
            let g2: f64 = g.iter().map(|v| v * v).sum();
            for i in 0..d {
                x[i] -= err / g2 * g[i];
            }
        }
        let h = field.value(&x);
        if (h - z).abs() < 1e-9 * z.abs().max(1.0) && field.bounds.contains(&x) && graph.edge_at(&x, h) == edge {
            return Some(x);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellAverage {
    pub mean: f64,
    pub se: f64,
    pub hits: usize,
    pub tries: usize,
}

/// Mean of `f` over the level component `C_edge(z)` with the `1/|grad H|`
/// density, by uniform sampling of the shell `|H - z| < half`.
pub fn thin_shell_average(
    graph: &ReebGraph,
    edge: EdgeId,
    z: f64,
    half: f64,
    f: impl Fn(&[f64]) -> f64,
    hits_wanted: usize,
    max_tries: usize,
    rng: &mut impl Rng,
) -> ShellAverage {
    let empty = ShellAverage {
        mean: f64::NAN,
        se: f64::NAN,
        hits: 0,
        tries: 0,
    };
    let Some(field) = graph.field() else { return empty };
    let Some((lo, hi)) = shell_box(graph, edge, z, half) else { return empty };
    let d = lo.len();
    let mut x = vec![0.0; d];
    let (mut s, mut s2, mut hits, mut tries) = (0.0, 0.0, 0usize, 0usize);
    while hits < hits_wanted && tries < max_tries {
        tries += 1;
        for i in 0..d {
            x[i] = lo[i] + (hi[i] - lo[i]) * rng.random::<f64>();
        }
        let h = field.value(&x);
        if (h - z).abs() >= half || graph.edge_at(&x, h) != edge {
            continue;
        }
        let v = f(&x);
        s += v;
        s2 += v * v;
        hits += 1;
    }
    if hits == 0 {
        return ShellAverage { tries, ..empty };
    }
    let n = hits as f64;
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(0.0);
    ShellAverage {
        mean,
        se: (var / n).sqrt(),
        hits,
        tries,
    }
}
