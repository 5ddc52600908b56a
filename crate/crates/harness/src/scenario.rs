//! Field, graph and coefficient setups shared by the subcommands.

use reebsim::coeffs::{
    classify_vertices, gluing_weights, tabulate_edges, EdgeCoefficientTable, GluingWeights, PerturbationModels,
    TabulationSettings, VertexClassification,
};
use reebsim::models::{DiffusionModel, VectorFieldModel};
use reebsim::morse::{catalog, find_critical_points, ScalarFieldModel};
use reebsim::reeb::{build_reeb_grid, build_reeb_separable, EdgeId, GraphPoint, ReebGraph, SublevelTree, VertexId};

use crate::config::{ExperimentConfig, PerturbationConfig};
use crate::{runtime, HarnessError};

pub fn field_from(cfg: &ExperimentConfig) -> ScalarFieldModel {
    catalog::by_name(&cfg.field.name, cfg.field.c, cfg.field.dim).expect("validated field name")
}

fn lifted(field: &ScalarFieldModel) -> bool {
    field.separable_parts().is_some_and(|s| s.p_dim >= 2)
}

pub fn default_cells(field: &ScalarFieldModel) -> Vec<usize> {
    if lifted(field) {
        vec![256, 256]
    } else {
        vec![512; field.dim()]
    }
}

pub fn default_z_max(name: &str) -> f64 {
    match name {
        "harmonic" => 4.0,
        "sep4d" => 2.5,
        _ => 1.5,
    }
}

/// Exit radius and start offset for first-exit runs.
pub fn default_exit_radii(field: &ScalarFieldModel) -> (f64, f64) {
    if lifted(field) {
        (0.3, 0.1)
    } else {
        (0.1, 0.02)
    }
}

pub fn default_star_radius(field: &ScalarFieldModel) -> f64 {
    if lifted(field) {
        0.1
    } else {
        0.05
    }
}

/// Reeb graph on a lattice, or by the separable lift when there are at least
/// two momenta.
pub fn build_graph(field: &ScalarFieldModel, cells: &[usize], z_max: f64) -> Result<ReebGraph, HarnessError> {
    if lifted(field) {
        let u = &field.separable_parts().expect("separable").potential;
        let cps = find_critical_points(u, 16, 1e-10, 1e-6).map_err(|e| runtime("reeb", e))?;
        let tree = SublevelTree::build(u, &cps.points, cells, z_max).map_err(|e| runtime("reeb", e))?;
        build_reeb_separable(field, &tree).map_err(|e| runtime("reeb", e))
    } else {
        let cps = find_critical_points(field, 16, 1e-10, 1e-6).map_err(|e| runtime("reeb", e))?;
        build_reeb_grid(field, &cps.points, cells, z_max).map_err(|e| runtime("reeb", e))
    }
}

fn drift(name: &str, lambda: f64, field: &ScalarFieldModel) -> VectorFieldModel {
    let d = field.dim();
    match name {
        "momentum_damping" => VectorFieldModel::momentum_damping(lambda, d / 2),
        "linear" => VectorFieldModel::linear(lambda, d),
        _ => VectorFieldModel::zero(),
    }
}

pub fn models_from(p: &PerturbationConfig, field: &ScalarFieldModel) -> PerturbationModels {
    PerturbationModels::new(
        DiffusionModel::identity(field.dim()),
        drift(&p.drift, p.lambda, field),
        drift(&p.beta, p.beta_lambda, field),
    )
}

/// `a2 = I`, `b = (-lambda p, 0)`, `beta = 0`.
pub fn damped(field: &ScalarFieldModel, lambda: f64) -> PerturbationModels {
    PerturbationModels::new(
        DiffusionModel::identity(field.dim()),
        VectorFieldModel::momentum_damping(lambda, field.dim() / 2),
        VectorFieldModel::zero(),
    )
}

pub struct Setup {
    pub field: ScalarFieldModel,
    pub models: PerturbationModels,
    pub graph: ReebGraph,
    pub tables: Vec<EdgeCoefficientTable>,
    pub gluing: Vec<GluingWeights>,
    pub classes: Vec<VertexClassification>,
}

impl Setup {
    pub fn build(field: ScalarFieldModel, graph: ReebGraph, models: PerturbationModels, settings: &TabulationSettings) -> Result<Self, HarnessError> {
        let tables = tabulate_edges(&graph, &models, settings).map_err(|e| runtime("coeffs", e))?;
        let gluing = gluing_weights(&tables, &graph).map_err(|e| runtime("coeffs", e))?;
        let classes = classify_vertices(&graph, &tables, &gluing).map_err(|e| runtime("coeffs", e))?;
        Ok(Self {
            field,
            models,
            graph,
            tables,
            gluing,
            classes,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let field = field_from(cfg);
        let graph = graph_from(cfg, &field)?;
        let models = models_from(&cfg.perturbation, &field);
        Self::build(field, graph, models, &tabulation(cfg))
    }

    pub fn table(&self, edge: EdgeId) -> &EdgeCoefficientTable {
        self.tables.iter().find(|t| t.edge == edge).expect("every edge is tabulated")
    }

    /// First essential vertex, else the first interior one.
    pub fn branch_vertex(&self) -> Option<VertexId> {
        self.classes
            .iter()
            .find(|c| c.essential)
            .map(|c| c.vertex)
            .or_else(|| self.graph.vertices.iter().find(|v| self.graph.is_interior(v.id)).map(|v| v.id))
    }

    /// A point on the open edge `offset` above its lower vertex.
    pub fn open_point(&self, offset: f64) -> Option<GraphPoint> {
        let e = self.graph.open_edge()?;
        let z = self.graph.edge(e).z_lo + offset;
        (z < self.graph.z_max).then(|| GraphPoint::on_edge(e, z))
    }
}

pub fn graph_from(cfg: &ExperimentConfig, field: &ScalarFieldModel) -> Result<ReebGraph, HarnessError> {
    let cells = cfg.field.cells.clone().unwrap_or_else(|| default_cells(field));
    let z_max = cfg.field.z_max.unwrap_or_else(|| default_z_max(&cfg.field.name));
    build_graph(field, &cells, z_max)
}

pub fn tabulation(cfg: &ExperimentConfig) -> TabulationSettings {
    TabulationSettings {
        z_points_per_edge: cfg.coeffs.z_points_per_edge,
        mc_samples: cfg.coeffs.mc_samples,
        vertex_window_factor: cfg.coeffs.vertex_window_factor,
        seed: cfg.seed,
        ..Default::default()
    }
}
