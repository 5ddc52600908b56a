use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::level::sample_level_point;
use super::{SdeConfig, SdeError, Stepper};
use crate::reeb::{EdgeId, GraphPoint, ReebGraph, VertexId};
use crate::rng::{substream, StreamTag};
use crate::stats::wilson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub index: usize,
    pub start: GraphPoint,
    /// `None` on timeout.
    pub exit_edge: Option<EdgeId>,
    pub exit_time: f64,
    pub final_point: GraphPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub vertex: VertexId,
    pub h: f64,
    pub n: usize,
    /// Attached edges, in [`ReebGraph::incident`] order.
    pub edges: Vec<EdgeId>,
    pub counts: Vec<usize>,
    pub frequencies: Vec<f64>,
    /// Wilson 99% intervals.
    pub intervals: Vec<(f64, f64)>,
    pub mean_times: Vec<f64>,
    pub timeouts: usize,
    /// Exits through edges not attached to the vertex.
    pub stray: usize,
    pub records: Vec<ExitRecord>,
}

impl ExitStats {
    pub fn frequency(&self, edge: EdgeId) -> Option<f64> {
        self.edges.iter().position(|&e| e == edge).map(|k| self.frequencies[k])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("exit stats serialize")
    }
}

/// Runs `n_traj` trajectories from the level `z_O +- h_start` on the
/// `entrance` edge until `|H - z_O|` reaches `h`, with `config.t_end` as the
/// timeout.
pub fn first_exit_stats(
    config: &SdeConfig,
    graph: &ReebGraph,
    vertex: VertexId,
    entrance: EdgeId,
    h: f64,
    h_start: f64,
    n_traj: usize,
) -> Result<ExitStats, SdeError> {
    config.validate(None)?;
    if !graph.is_interior(vertex) {
        return Err(SdeError::InvalidConfig(format!("vertex {vertex} is not interior")));
    }
    let edges = graph.incident(vertex);
    if !edges.contains(&entrance) {
        return Err(SdeError::InvalidConfig(format!("edge {entrance} is not attached to vertex {vertex}")));
    }
    if !(h_start > 0.0 && h_start < h) {
        return Err(SdeError::InvalidConfig("need 0 < h_start < h".into()));
    }
    let zo = graph.vertex(vertex).z;
    let z_start = zo + graph.edge(entrance).direction_from(vertex) * h_start;
    let half = (0.1 * h_start).min(1e-2);
    let field = &config.field;

    let records: Vec<ExitRecord> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut srng = substream(config.seed, StreamTag::ExitStart, i as u64);
            let mut x = sample_level_point(graph, entrance, z_start, half, &mut srng, 50_000_000).ok_or(SdeError::NoStartPoint)?;
            let start = GraphPoint::on_edge(entrance, z_start);
            let mut rng = substream(config.seed, StreamTag::FullSde, i as u64 + 1);
            let mut stepper = Stepper::new(config, graph.z_max);
            let n = (config.t_end / config.dt).ceil() as usize;
            for k in 1..=n {
                let t = k as f64 * config.dt;
                stepper.step(&mut x, &mut rng, t)?;
                let z = field.value(&x);
                if (z - zo).abs() >= h {
                    let e = graph.edge_at(&x, z);
                    return Ok(ExitRecord {
                        index: i,
                        start,
                        exit_edge: Some(e),
                        exit_time: t,
                        final_point: GraphPoint::on_edge(e, z),
                    });
                }
            }
            let (e, z) = graph.project_edge(&x);
            Ok(ExitRecord {
                index: i,
                start,
                exit_edge: None,
                exit_time: config.t_end,
                final_point: GraphPoint::on_edge(e, z),
            })
        })
        .collect::<Result<_, SdeError>>()?;

    let mut counts = vec![0usize; edges.len()];
    let mut times = vec![0.0; edges.len()];
    let (mut timeouts, mut stray) = (0, 0);
    for r in &records {
        match r.exit_edge {
            None => timeouts += 1,
            Some(e) => match edges.iter().position(|&a| a == e) {
                Some(k) => {
                    counts[k] += 1;
                    times[k] += r.exit_time;
                }
                None => stray += 1,
            },
        }
    }
    let exited = n_traj - timeouts;
    let frequencies = counts.iter().map(|&c| c as f64 / exited.max(1) as f64).collect();
    let intervals = counts.iter().map(|&c| wilson(c, exited.max(1), 0.99)).collect();
    let mean_times = counts
        .iter()
        .zip(&times)
        .map(|(&c, &t)| if c > 0 { t / c as f64 } else { f64::NAN })
        .collect();
    Ok(ExitStats {
        vertex,
        h,
        n: n_traj,
        edges,
        counts,
        frequencies,
        intervals,
        mean_times,
        timeouts,
        stray,
        records,
    })
}
