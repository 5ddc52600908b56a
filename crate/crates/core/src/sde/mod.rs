//! Full fast-slow diffusion in `R^d`: the `1/eps` Hamiltonian flow, the
//! energy-preserving `kappa` noise and the energy-changing `delta` noise.

mod exit;
mod level;
mod step;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::PerturbationModels;
use crate::morse::ScalarFieldModel;
use crate::reeb::{GraphPoint, ReebGraph, VertexId};
use crate::rng::{substream, StreamTag};

pub use exit::{first_exit_stats, ExitRecord, ExitStats};
pub use level::{sample_level_point, thin_shell_average, ShellAverage};
pub(crate) use step::Stepper;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fast sub-flow changed H by {drift:.3e} in one step at t = {t:.6}")]
    StepTooLarge { t: f64, drift: f64 },
    #[error("trajectory left the box or the ceiling at t = {t:.6}")]
    BoxExit { t: f64 },
    #[error("level drifted by {drift:.3e} at t = {t:.6}")]
    LevelDrift { t: f64, drift: f64 },
    #[error("could not place a start point on the level component")]
    NoStartPoint,
}

#[derive(Debug, Clone)]
pub struct SdeConfig {
    pub field: ScalarFieldModel,
    pub epsilon: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Horizon in slow time.
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub models: PerturbationModels,
    /// Keep every `record_every`-th state.
    pub record_every: usize,
    /// Largest relative change of `H` tolerated in one fast half-step.
    pub energy_tol: f64,
}

impl SdeConfig {
    pub fn new(field: ScalarFieldModel, models: PerturbationModels, epsilon: f64, x0: Vec<f64>) -> Self {
        Self {
            field,
            epsilon,
            kappa: 0.0,
            delta: 0.0,
            t_end: 1.0,
            dt: epsilon / 100.0,
            seed: 1,
            x0,
            models,
            record_every: 100,
            energy_tol: 1e-4,
        }
    }

    pub fn validate(&self, kappa_max: Option<f64>) -> Result<(), SdeError> {
        let bad = |m: String| Err(SdeError::InvalidConfig(m));
        let d = self.field.dim();
        if d % 2 != 0 {
            return bad(format!("dimension {d} is odd"));
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(self.dt > 0.0) || self.dt > self.epsilon / 50.0 * (1.0 + 1e-12) {
            return bad(format!("dt = {} must lie in (0, epsilon/50]", self.dt));
        }
        if self.kappa < 0.0 || self.delta < 0.0 {
            return bad("kappa and delta must be non-negative".into());
        }
        if let Some(k) = kappa_max {
            if self.kappa >= k {
                return bad(format!("kappa = {} is not below the admissible bound {k:.4}", self.kappa));
            }
        }
        if self.x0.len() != d {
            return bad(format!("x0 has {} components, field has {d}", self.x0.len()));
        }
        if !self.field.bounds.contains(&self.x0) {
            return bad("x0 lies outside the bounding box".into());
        }
        if self.models.a2.dim() != d {
            return bad("a2 dimension differs from the field".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be positive".into());
        }
        Ok(())
    }
}

/// `sigma1 = |grad H| (I - n n^T)`, `n = grad H / |grad H|`; zero at criticals.
pub fn make_sigma1(field: &ScalarFieldModel, x: &[f64]) -> DMatrix<f64> {
    let d = field.dim();
    let g = field.gradient_vec(x);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return DMatrix::zeros(d, d);
    }
    DMatrix::from_fn(d, d, |i, j| {
        let id = if i == j { norm } else { 0.0 };
        id - g[i] * g[j] / norm
    })
}

/// Level crossing of an interior vertex value between two steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCrossing {
    /// Linearly interpolated crossing time.
    pub t: f64,
    pub vertex: VertexId,
    pub upward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    /// Empty when the graph carries no projection.
    pub points: Vec<GraphPoint>,
    pub events: Vec<LevelCrossing>,
}

impl PathSample {
    pub fn max_energy_deviation(&self) -> f64 {
        let h0 = self.energies[0];
        self.energies.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",H,edge\n");
        for k in 0..self.times.len() {
            out.push_str(&format!("{:e}", self.times[k]));
            for v in &self.states[k] {
                out.push_str(&format!(",{v:e}"));
            }
            let edge = self
                .points
                .get(k)
                .map(|p| match p.location {
                    crate::reeb::Location::Edge(e) => e.to_string(),
                    crate::reeb::Location::Vertex(v) => format!("v{v}"),
                })
                .unwrap_or_default();
            out.push_str(&format!(",{:e},{edge}\n", self.energies[k]));
        }
        out
    }
}

/// Integrates one trajectory of the full system from `config.x0`.
pub fn simulate_full(config: &SdeConfig, graph: &ReebGraph) -> Result<PathSample, SdeError> {
    config.validate(None)?;
    let mut rng = substream(config.seed, StreamTag::FullSde, 0);
    let mut stepper = Stepper::new(config, graph.z_max);
    let levels: Vec<(VertexId, f64)> = graph
        .vertices
        .iter()
        .filter(|v| graph.is_interior(v.id))
        .map(|v| (v.id, v.z))
        .collect();
    let project = graph.has_projection();
    let mut x = config.x0.clone();
    let mut h = config.field.value(&x);
    let mut path = PathSample {
        times: vec![0.0],
        states: vec![x.clone()],
        energies: vec![h],
        points: if project { vec![graph.project(&x)] } else { Vec::new() },
        events: Vec::new(),
    };
    let n = (config.t_end / config.dt).round() as usize;
    for k in 1..=n {
        let t = k as f64 * config.dt;
        stepper.step(&mut x, &mut rng, t)?;
        let h_new = config.field.value(&x);
        for &(v, zv) in &levels {
            if (h - zv) * (h_new - zv) < 0.0 {
                let frac = (zv - h) / (h_new - h);
                path.events.push(LevelCrossing {
                    t: t - config.dt + frac * config.dt,
                    vertex: v,
                    upward: h_new > h,
                });
            }
        }
        h = h_new;
        if k % config.record_every == 0 || k == n {
            path.times.push(t);
            path.states.push(x.clone());
            path.energies.push(h);
            if project {
                path.points.push(graph.project(&x));
            }
        }
    }
    Ok(path)
}

/// Time average of `f` along a `delta = 0`, drift-free trajectory.
pub fn ergodic_average(config: &SdeConfig, graph: &ReebGraph, f: impl Fn(&[f64]) -> f64) -> Result<f64, SdeError> {
    config.validate(None)?;
    if config.delta != 0.0 || !config.models.b.is_zero() || !config.models.beta.is_zero() {
        return Err(SdeError::InvalidConfig("ergodic averaging needs delta = 0 and b = beta = 0".into()));
    }
    let mut rng = substream(config.seed, StreamTag::FullSde, 0);
    let mut stepper = Stepper::new(config, graph.z_max);
    let mut x = config.x0.clone();
    let h0 = config.field.value(&x);
    let tol = 1e-3 * h0.abs().max(1.0);
    let n = (config.t_end / config.dt).round() as usize;
    let mut prev = f(&x);
    let mut acc = 0.0;
    for k in 1..=n {
        let t = k as f64 * config.dt;
        stepper.step(&mut x, &mut rng, t)?;
        let drift = (config.field.value(&x) - h0).abs();
        if drift > tol {
            return Err(SdeError::LevelDrift { t, drift });
        }
        let cur = f(&x);
        acc += 0.5 * (prev + cur);
        prev = cur;
    }
    Ok(acc / n as f64)
}

/// One step of the full scheme; exposed for generator checks.
pub fn step_once(config: &SdeConfig, z_max: f64, x: &mut [f64], rng: &mut impl Rng) -> Result<(), SdeError> {
    Stepper::new(config, z_max).step(x, rng, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalAverage {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Mean of `f(X_T)` over `n_traj` independent paths started at `config.x0`.
/// Path `i` draws from `substream(seed, FullSde, i + 1)`.
pub fn terminal_average(
    config: &SdeConfig,
    graph: &ReebGraph,
    n_traj: usize,
    f: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<TerminalAverage, SdeError> {
    config.validate(None)?;
    if n_traj == 0 {
        return Err(SdeError::InvalidConfig("n_traj must be positive".into()));
    }
    let n_steps = (config.t_end / config.dt).round() as usize;
    let values: Vec<Result<f64, SdeError>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(config.seed, StreamTag::FullSde, i as u64 + 1);
            let mut stepper = Stepper::new(config, graph.z_max);
            let mut x = config.x0.clone();
            for k in 1..=n_steps {
                stepper.step(&mut x, &mut rng, k as f64 * config.dt)?;
            }
            Ok(f(&x))
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let (mean, se) = crate::stats::mean_se(&values);
    Ok(TerminalAverage { mean, se, n: n_traj })
}
