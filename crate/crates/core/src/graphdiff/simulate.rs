use std::cell::OnceCell;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GraphDiffError, StarField, StarProblem, STAR_CELLS};
use crate::coeffs::{EdgeCoefficientTable, GluingWeights};
use crate::reeb::{EdgeId, GraphPoint, Location, ReebGraph, VertexId};
use crate::rng::{substream, StreamTag};

#[derive(Debug, Clone)]
pub struct GraphDiffusionConfig<'a> {
    pub graph: &'a ReebGraph,
    pub tables: &'a [EdgeCoefficientTable],
    pub gluing: &'a [GluingWeights],
    pub delta: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Star radius around interior vertices.
    pub h_v: f64,
    pub start: GraphPoint,
    pub seed: u64,
    /// Substream index of this trajectory.
    pub trajectory: u64,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexExcursion {
    pub vertex: VertexId,
    pub t_enter: f64,
    pub t_exit: f64,
    pub entry_edge: Option<EdgeId>,
    pub exit_edge: EdgeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPath {
    pub times: Vec<f64>,
    pub points: Vec<GraphPoint>,
    pub excursions: Vec<VertexExcursion>,
}

impl GraphPath {
    pub fn final_point(&self) -> GraphPoint {
        *self.points.last().expect("path is never empty")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,edge,z\n");
        for (t, p) in self.times.iter().zip(&self.points) {
            let loc = match p.location {
                Location::Edge(e) => e.to_string(),
                Location::Vertex(v) => format!("v{v}"),
            };
            out.push_str(&format!("{t:e},{loc},{:e}\n", p.z));
        }
        out
    }
}

struct StarCache {
    exits: Vec<StarField>,
    time: StarField,
    second: StarField,
}

/// `(drift, diffusion)` of `dz` on an edge.
pub(crate) fn ito_coefficients(t: &EdgeCoefficientTable, z: f64, delta: f64) -> (f64, f64) {
    let v = t.v(z);
    let drift = delta * t.h_prime(z) / (2.0 * v) + t.b_bar(z) + delta * t.beta_bar(z);
    let diff = (delta * t.h(z) / v).max(0.0);
    (drift, diff)
}

impl GraphDiffusionConfig<'_> {
    pub fn validate(&self) -> Result<(), GraphDiffError> {
        let bad = |m: String| Err(GraphDiffError::InvalidConfig(m));
        if !(self.delta > 0.0 && self.dt > 0.0 && self.h_v > 0.0 && self.t_end >= 0.0) {
            return bad("delta, dt, h_v must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        let g = self.graph;
        for e in &g.edges {
            if g.edges.len() > 1 && self.h_v >= 0.5 * (e.z_hi - e.z_lo) {
                return bad(format!("h_v = {} is not below half of edge {}", self.h_v, e.id));
            }
        }
        for t in self.tables {
            let e = g.edge(t.edge);
            let near = |z: f64| {
                [e.lower, e.upper]
                    .into_iter()
                    .flatten()
                    .any(|v| g.is_interior(v) && (g.vertex(v).z - z).abs() < 0.5 * self.h_v)
            };
            for r in t.rows.iter().filter(|r| !near(r.z)) {
                let (drift, diff) = ito_coefficients(t, r.z, self.delta);
                let mv = self.dt * drift.abs() + (self.dt * diff).sqrt();
                if mv >= self.h_v / 5.0 {
                    return bad(format!("dt = {} moves z by {mv:.3e} on edge {} at z = {:.4}", self.dt, t.edge, r.z));
                }
            }
        }
        Ok(())
    }
}

/// One path of the graph diffusion.
pub fn simulate_graph_diffusion(config: &GraphDiffusionConfig) -> Result<GraphPath, GraphDiffError> {
    config.validate()?;
    let g = config.graph;
    let caches: Vec<OnceCell<StarCache>> = (0..g.vertices.len()).map(|_| OnceCell::new()).collect();
    let star = |v: VertexId| -> Result<&StarCache, GraphDiffError> {
        if let Some(c) = caches[v].get() {
            return Ok(c);
        }
        let p = StarProblem::new(g, config.tables, config.gluing, config.delta, v, config.h_v, STAR_CELLS)?;
        let time = p.time_field()?;
        let c = StarCache {
            exits: p.exit_fields()?,
            second: p.second_moment_field(&time)?,
            time,
        };
        Ok(caches[v].get_or_init(|| c))
    };
    let table = |e: EdgeId| {
        config
            .tables
            .iter()
            .find(|t| t.edge == e)
            .ok_or(GraphDiffError::CoefficientGap { edge: e, z: f64::NAN })
    };
    let mut rng = substream(config.seed, StreamTag::GraphDiffusion, config.trajectory);
    let mut t = 0.0;
    let mut path = GraphPath {
        times: vec![0.0],
        points: vec![config.start],
        excursions: Vec::new(),
    };

    // excursion from distance `s` on `from` (or the vertex itself)
    let excursion = |v: VertexId, from: Option<(EdgeId, f64)>, t: &mut f64, rng: &mut rand_chacha::ChaCha8Rng, path: &mut GraphPath| -> Result<(EdgeId, f64), GraphDiffError> {
        let c = star(v)?;
        let probs: Vec<f64> = c
            .exits
            .iter()
            .map(|f| match from {
                Some((e, s)) => f.at(e, s),
                None => f.at_vertex(),
            })
            .map(|p| p.max(0.0))
            .collect();
        let total: f64 = probs.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut k = probs.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            if u < *p {
                k = i;
                break;
            }
            u -= p;
        }
        let at = |f: &StarField| match from {
            Some((e, s)) => f.at(e, s),
            None => f.at_vertex(),
        };
        let (mean, second) = (at(&c.time), at(&c.second));
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(GraphDiffError::ClockStall { vertex: v });
        }
        // gamma law with the exit time's first two moments
        let var = second - mean * mean;
        let tau = if var > 1e-12 * mean * mean && var.is_finite() {
            Gamma::new(mean * mean / var, var / mean).expect("positive parameters").sample(rng)
        } else {
            mean
        };
        let exit = c.exits[k].edges[k];
        path.excursions.push(VertexExcursion {
            vertex: v,
            t_enter: *t,
            t_exit: *t + tau,
            entry_edge: from.map(|f| f.0),
            exit_edge: exit,
        });
        *t += tau;
        let z = g.vertex(v).z + g.edge(exit).direction_from(v) * config.h_v;
        Ok((exit, z))
    };

    let (mut e, mut z) = match config.start.location {
        Location::Edge(e) => (e, config.start.z),
        Location::Vertex(v) => {
            if !g.is_interior(v) {
                return Err(GraphDiffError::InvalidConfig("cannot start at an exterior vertex".into()));
            }
            excursion(v, None, &mut t, &mut rng, &mut path)?
        }
    };
    let mut steps = 0usize;
    while t < config.t_end {
        let edge = g.edge(e);
        // star entry
        let hit = [edge.lower, edge.upper]
            .into_iter()
            .flatten()
            .find(|&v| g.is_interior(v) && (g.vertex(v).z - z).abs() < 0.5 * config.h_v);
        if let Some(v) = hit {
            let s = (z - g.vertex(v).z) * edge.direction_from(v);
            let from = if s > 0.0 { Some((e, s)) } else { None };
            (e, z) = excursion(v, from, &mut t, &mut rng, &mut path)?;
            path.times.push(t);
            path.points.push(GraphPoint::on_edge(e, z));
            continue;
        }
        let tb = table(e)?;
        let (_, hi) = tb.z_range();
        if z > hi && edge.is_open() || !z.is_finite() {
            return Err(GraphDiffError::CoefficientGap { edge: e, z });
        }
        let (drift, diff) = ito_coefficients(tb, z, config.delta);
        let xi: f64 = rng.sample(StandardNormal);
        let mut zn = z + drift * config.dt + (diff * config.dt).sqrt() * xi;
        // exterior ends are never reached by the exact process
        for v in [edge.lower, edge.upper].into_iter().flatten() {
            if !g.is_interior(v) {
                let zv = g.vertex(v).z;
                let side = edge.direction_from(v);
                if (zn - zv) * side <= 0.0 {
                    zn = zv + side * (zn - zv).abs().max(f64::EPSILON * zv.abs().max(1.0));
                }
            }
        }
        z = zn;
        t += config.dt;
        steps += 1;
        if steps % config.record_every == 0 {
            path.times.push(t);
            path.points.push(GraphPoint::on_edge(e, z));
        }
    }
    if path.times.last() != Some(&t) {
        path.times.push(t);
        path.points.push(GraphPoint::on_edge(e, z));
    }
    Ok(path)
}
