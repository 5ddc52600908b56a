use serde::{Deserialize, Serialize};

use super::flow::{simulate_limit_with, LimitSettings, LimitStatus};
use super::LimitError;
use crate::coeffs::{stable_set, EdgeCoefficientTable, StableTarget, VertexClassification};
use crate::reeb::{GraphPoint, ReebGraph, VertexId};
use crate::rng::{substream, StreamTag};
use crate::sde::thin_shell_average;

/// Half-width of the level shell used for interior targets.
pub const SHELL_HALF_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitDistribution {
    pub start: GraphPoint,
    pub targets: Vec<StableTarget>,
}

impl LimitDistribution {
    pub fn total_probability(&self) -> f64 {
        self.targets.iter().map(|t| t.probability).sum()
    }

    /// Mass of the exterior vertex `v` (zero if unreachable).
    pub fn vertex_probability(&self, v: VertexId) -> f64 {
        self.targets.iter().filter(|t| t.vertex == Some(v)).map(|t| t.probability).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution serializes")
    }
}

/// Exact target probabilities of the limit process started at `y0`.
pub fn limit_distribution(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    classes: &[VertexClassification],
    y0: GraphPoint,
) -> Result<LimitDistribution, LimitError> {
    let set = stable_set(graph, tables, classes, y0)?;
    Ok(LimitDistribution {
        start: set.start,
        targets: set.targets,
    })
}

/// Longest time, over all targets, for the limit path following that
/// target's branches to come within `radius` of it.
pub fn settling_time(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    classes: &[VertexClassification],
    dist: &LimitDistribution,
    radius: f64,
) -> Result<f64, LimitError> {
    let mut worst: f64 = 0.0;
    for target in &dist.targets {
        let mut next = target.branches.iter();
        let path = simulate_limit_with(graph, tables, classes, dist.start, f64::INFINITY, &LimitSettings::default(), &mut |class| {
            match next.next() {
                Some(&(v, e)) if v == class.vertex => Ok((e, f64::NAN)),
                _ => Err(LimitError::InvalidInput(format!("branch list of target on edge {} does not match vertex {}", target.edge, class.vertex))),
            }
        })?;
        let LimitStatus::Converged { t, .. } = path.status else {
            return Err(LimitError::InvalidInput("limit path did not converge".into()));
        };
        let reach = path
            .segments
            .last()
            .and_then(|s| s.z.iter().zip(&s.times).find(|(z, _)| (*z - target.z).abs() < radius).map(|(_, t)| *t))
            .unwrap_or(t);
        worst = worst.max(reach);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimate {
    pub value: f64,
    pub se: f64,
    /// `(mean, se)` of the observable under each target's measure.
    pub per_target: Vec<(f64, f64)>,
}

/// `sum_targets p * int f dmu` with point masses at exterior vertices and
/// the level density on interior targets; the field comes from `graph`.
pub fn expected_observable(
    graph: &ReebGraph,
    dist: &LimitDistribution,
    f: impl Fn(&[f64]) -> f64,
    mc_samples: usize,
    seed: u64,
) -> Result<ObservableEstimate, LimitError> {
    let mut per_target = Vec::with_capacity(dist.targets.len());
    for (i, t) in dist.targets.iter().enumerate() {
        let est = match t.vertex {
            Some(v) => {
                let x = graph
                    .vertex(v)
                    .critical
                    .as_ref()
                    .ok_or_else(|| LimitError::InvalidInput(format!("vertex {v} has no critical point")))?;
                (f(&x.location), 0.0)
            }
            None => {
                let mut rng = substream(seed, StreamTag::Observable, i as u64);
                let s = thin_shell_average(graph, t.edge, t.z, SHELL_HALF_WIDTH, &f, mc_samples, 1000 * mc_samples.max(1), &mut rng);
                if s.hits == 0 {
                    return Err(LimitError::EmptyShell { edge: t.edge, z: t.z });
                }
                (s.mean, if s.hits > 1 { s.se } else { f64::NAN })
            }
        };
        per_target.push(est);
    }
    let value = dist.targets.iter().zip(&per_target).map(|(t, e)| t.probability * e.0).sum();
    let se = dist
        .targets
        .iter()
        .zip(&per_target)
        .map(|(t, e)| (t.probability * e.1).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ObservableEstimate { value, se, per_target })
}
