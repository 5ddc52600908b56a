//! Experiment configuration: a TOML file with one table per module.
//!
//! ```toml
//! seed = 1
//! threads = 0          # 0: rayon default
//! out = "reebsim-out"
//!
//! [field]
//! name = "sep4d"       # harmonic | doublewell1d | doublewell1d_tilted | sep4d
//! c = 0.1
//!
//! [perturbation]
//! drift = "momentum_damping"   # zero | momentum_damping | linear
//! lambda = 0.5
//!
//! [coeffs]
//! mc_samples = 1000000
//!
//! [sde]
//! epsilon = 1e-3
//! kappa = 0.05
//! delta = 1e-2
//!
//! [graphdiff]
//! deltas = [1e-2, 1e-3, 1e-4]
//!
//! [limit]
//! t_end = 100.0
//!
//! [verify]
//! slow = false
//! ```
//!
//! Unknown keys are rejected. Every numeric parameter has a default except
//! `field.name`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use reebsim::morse::catalog;

use crate::HarnessError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub field: FieldConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub coeffs: CoeffsConfig,
    #[serde(default)]
    pub sde: SdeBlock,
    #[serde(default)]
    pub graphdiff: GraphDiffBlock,
    #[serde(default)]
    pub limit: LimitBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
}

fn one() -> u64 {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("reebsim-out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub name: String,
    /// Tilt of the parameterised double wells.
    #[serde(default)]
    pub c: f64,
    /// Dimension of `harmonic`.
    pub dim: Option<usize>,
    /// Lattice cells per axis (of the potential for separable fields).
    pub cells: Option<Vec<usize>>,
    /// Ceiling of the graph.
    pub z_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub drift: String,
    pub lambda: f64,
    pub beta: String,
    pub beta_lambda: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            drift: "momentum_damping".into(),
            lambda: 0.5,
            beta: "zero".into(),
            beta_lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoeffsConfig {
    pub z_points_per_edge: usize,
    pub mc_samples: usize,
    pub vertex_window_factor: usize,
}

impl Default for CoeffsConfig {
    fn default() -> Self {
        Self {
            z_points_per_edge: 24,
            mc_samples: 1_000_000,
            vertex_window_factor: 8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdeBlock {
    pub epsilon: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Defaults to `epsilon / 50`.
    pub dt: Option<f64>,
    /// Time limit per exit trajectory.
    pub t_end: f64,
    pub n_traj: usize,
    /// Exit radius `h` around the vertex; field-dependent default.
    pub exit_radius: Option<f64>,
    /// Starting distance from the vertex; field-dependent default.
    pub start_offset: Option<f64>,
    pub record_every: usize,
    /// Epsilon sweep for `converge`.
    pub epsilons: Vec<f64>,
}

impl Default for SdeBlock {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            kappa: 0.05,
            delta: 1e-2,
            dt: None,
            t_end: 20.0,
            n_traj: 2000,
            exit_radius: None,
            start_offset: None,
            record_every: 100,
            epsilons: vec![1e-2, 3e-3, 1e-3],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphDiffBlock {
    pub deltas: Vec<f64>,
    /// Star radius; field-dependent default.
    pub h_v: Option<f64>,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for GraphDiffBlock {
    fn default() -> Self {
        Self {
            deltas: vec![1e-2, 1e-3, 1e-4],
            h_v: None,
            dt: 1e-4,
            t_end: 4.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitBlock {
    /// Start on the open edge this far above its lower vertex.
    pub start_offset: f64,
    pub t_end: f64,
    pub n_runs: usize,
    pub observable_samples: usize,
}

impl Default for LimitBlock {
    fn default() -> Self {
        Self {
            start_offset: 0.5,
            t_end: 100.0,
            n_runs: 10_000,
            observable_samples: 4000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    /// Include the long Monte Carlo bridge check.
    pub slow: bool,
    /// Smaller sample sizes throughout (for smoke and determinism runs).
    pub reduced: bool,
    /// Criteria to run; empty means all.
    pub criteria: Vec<u32>,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            slow: false,
            reduced: false,
            criteria: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every block before anything is computed.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |key: &str, msg: String| Err(HarnessError::ConfigInvalid(format!("{key}: {msg}")));
        if catalog::by_name(&self.field.name, self.field.c, self.field.dim).is_none() {
            return bad("field.name", format!("unknown field `{}` (known: {})", self.field.name, catalog::NAMES.join(", ")));
        }
        if self.field.name == "doublewell2d" {
            return bad("field.name", "doublewell2d is a potential, not a Hamiltonian; use sep4d".into());
        }
        if let Some(d) = self.field.dim {
            if d == 0 || d % 2 != 0 {
                return bad("field.dim", format!("{d} must be positive and even"));
            }
        }
        if let Some(cells) = &self.field.cells {
            if cells.is_empty() || cells.iter().any(|&c| c < 8) {
                return bad("field.cells", format!("{cells:?}"));
            }
        }
        if let Some(z) = self.field.z_max {
            if !z.is_finite() {
                return bad("field.z_max", format!("{z}"));
            }
        }
        if !["zero", "momentum_damping", "linear"].contains(&self.perturbation.drift.as_str()) {
            return bad("perturbation.drift", format!("unknown drift `{}`", self.perturbation.drift));
        }
        if !["zero", "momentum_damping", "linear"].contains(&self.perturbation.beta.as_str()) {
            return bad("perturbation.beta", format!("unknown drift `{}`", self.perturbation.beta));
        }
        if !self.perturbation.lambda.is_finite() {
            return bad("perturbation.lambda", "must be finite".into());
        }
        let c = &self.coeffs;
        if c.z_points_per_edge < 4 {
            return bad("coeffs.z_points_per_edge", "need at least 4".into());
        }
        if c.mc_samples < 1000 {
            return bad("coeffs.mc_samples", "need at least 1000".into());
        }
        if c.vertex_window_factor == 0 {
            return bad("coeffs.vertex_window_factor", "must be positive".into());
        }
        let s = &self.sde;
        if !(s.epsilon > 0.0) {
            return bad("sde.epsilon", "must be positive".into());
        }
        if !(s.kappa >= 0.0) || !(s.delta >= 0.0) {
            return bad("sde.kappa", "kappa and delta must be non-negative".into());
        }
        if let Some(dt) = s.dt {
            if !(dt > 0.0 && dt <= s.epsilon / 50.0) {
                return bad("sde.dt", format!("{dt} must lie in (0, epsilon/50]"));
            }
        }
        if !(s.t_end > 0.0) {
            return bad("sde.t_end", "must be positive".into());
        }
        if s.n_traj == 0 {
            return bad("sde.n_traj", "must be positive".into());
        }
        if s.record_every == 0 {
            return bad("sde.record_every", "must be positive".into());
        }
        match (s.exit_radius, s.start_offset) {
            (Some(h), Some(h0)) if !(h0 > 0.0 && h0 < h) => return bad("sde.start_offset", "need 0 < start_offset < exit_radius".into()),
            (Some(h), _) if !(h > 0.0) => return bad("sde.exit_radius", "must be positive".into()),
            _ => {}
        }
        if s.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("sde.epsilons", "must be positive".into());
        }
        let g = &self.graphdiff;
        if g.deltas.is_empty() || g.deltas.iter().any(|d| !(*d > 0.0)) {
            return bad("graphdiff.deltas", "need at least one positive value".into());
        }
        if g.h_v.is_some_and(|h| !(h > 0.0)) {
            return bad("graphdiff.h_v", "must be positive".into());
        }
        if !(g.dt > 0.0) || !(g.t_end >= 0.0) {
            return bad("graphdiff.dt", "dt must be positive and t_end non-negative".into());
        }
        let l = &self.limit;
        if !(l.start_offset > 0.0) {
            return bad("limit.start_offset", "must be positive".into());
        }
        if !(l.t_end > 0.0) {
            return bad("limit.t_end", "must be positive".into());
        }
        if l.n_runs == 0 || l.observable_samples == 0 {
            return bad("limit.n_runs", "n_runs and observable_samples must be positive".into());
        }
        if let Some(&k) = self.verify.criteria.iter().find(|&&k| !(1..=10).contains(&k)) {
            return bad("verify.criteria", format!("no criterion {k}"));
        }
        Ok(())
    }
}
