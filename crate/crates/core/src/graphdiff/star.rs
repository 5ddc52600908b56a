use serde::{Deserialize, Serialize};

use super::GraphDiffError;
use crate::coeffs::{EdgeCoefficientTable, GluingWeights};
use crate::reeb::{EdgeId, ReebGraph, VertexId};

/// `x / (e^x - 1)`
pub(crate) fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

/// Local coefficients of one star arm in the distance `s = |z - z_O|`:
/// `(A u_s)_s + B u_s = -R f` with `A = delta h / 2`, `B` the signed flux
/// seen from the vertex and `R = v`.
#[derive(Debug, Clone)]
struct Arm {
    edge: EdgeId,
    gamma: f64,
    /// `A`, `B` at cell midpoints, `R` at nodes.
    a: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
}

/// Dirichlet problems for the graph generator on the star of radius `h_v`
/// around an interior vertex, glued by `sum_k gamma_k D_k u(O) = 0`.
#[derive(Debug, Clone)]
pub struct StarProblem {
    pub vertex: VertexId,
    pub h_v: f64,
    pub delta: f64,
    /// Shared node positions `0 = s_0 < ... < s_N = h_v`.
    pub mesh: Vec<f64>,
    arms: Vec<Arm>,
}

/// Solutions on every arm; `values[k][j]` at `mesh[j]` on arm `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarField {
    pub edges: Vec<EdgeId>,
    pub mesh: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl StarField {
    pub fn at_vertex(&self) -> f64 {
        self.values[0][0]
    }

    /// Linear interpolation at distance `s` on `edge`.
    pub fn at(&self, edge: EdgeId, s: f64) -> f64 {
        let k = self.edges.iter().position(|&e| e == edge).expect("edge on star");
        let m = &self.mesh;
        let s = s.clamp(0.0, m[m.len() - 1]);
        let j = m.partition_point(|&x| x <= s).clamp(1, m.len() - 1);
        let w = (s - m[j - 1]) / (m[j] - m[j - 1]);
        self.values[k][j - 1] * (1.0 - w) + self.values[k][j] * w
    }
}

impl StarProblem {
    pub fn new(
        graph: &ReebGraph,
        tables: &[EdgeCoefficientTable],
        gluing: &[GluingWeights],
        delta: f64,
        vertex: VertexId,
        h_v: f64,
        cells: usize,
    ) -> Result<Self, GraphDiffError> {
        if !graph.is_interior(vertex) {
            return Err(GraphDiffError::NotInterior(vertex));
        }
        let zo = graph.vertex(vertex).z;
        let n = cells.max(8);
        // graded toward the vertex, where v has its log singularity
        let mesh: Vec<f64> = (0..=n).map(|j| h_v * (j as f64 / n as f64).powi(3)).collect();
        let glue = gluing
            .iter()
            .find(|g| g.vertex == vertex)
            .ok_or(GraphDiffError::MissingGluing(vertex))?;
        let mut arms = Vec::new();
        for e in graph.incident(vertex) {
            let edge = graph.edge(e);
            if h_v >= 0.5 * (edge.z_hi - edge.z_lo) {
                return Err(GraphDiffError::RadiusTooLarge { vertex, h_v });
            }
            let t = tables
                .iter()
                .find(|t| t.edge == e)
                .ok_or(GraphDiffError::CoefficientGap { edge: e, z: zo })?;
            let dir = edge.direction_from(vertex);
            let z_of = |s: f64| zo + dir * s;
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for j in 0..n {
                let s = 0.5 * (mesh[j] + mesh[j + 1]);
                a.push(0.5 * delta * t.h(z_of(s)));
                b.push(dir * t.flux(z_of(s), delta));
            }
            let mut r = Vec::with_capacity(n + 1);
            r.push(t.v(z_of(0.25 * mesh[1])));
            for j in 1..=n {
                r.push(t.v(z_of(mesh[j])));
            }
            let gamma = glue.gamma(e).ok_or(GraphDiffError::MissingGluing(vertex))?;
            arms.push(Arm { edge: e, gamma, a, b, r });
        }
        Ok(Self {
            vertex,
            h_v,
            delta,
            mesh,
            arms,
        })
    }

    pub fn edges(&self) -> Vec<EdgeId> {
        self.arms.iter().map(|a| a.edge).collect()
    }

    /// Solves with boundary value `boundary[k]` at `s = h_v` on arm `k` and
    /// source `rhs` (`1` for exit times, `0` for harmonic functions).
    pub fn solve(&self, boundary: &[f64], rhs: f64) -> Result<StarField, GraphDiffError> {
        self.solve_with(boundary, |_, _| rhs)
    }

    /// Same as [`StarProblem::solve`] with source `rhs(arm, node)`.
    pub fn solve_with(&self, boundary: &[f64], rhs: impl Fn(usize, usize) -> f64) -> Result<StarField, GraphDiffError> {
        let n = self.mesh.len() - 1;
        let mut alpha = Vec::with_capacity(self.arms.len());
        let mut beta = Vec::with_capacity(self.arms.len());
        // vertex row: sum_k w_k (F_k + R_k0 d_k/2 rhs) = 0
        let (mut c0, mut c1) = (0.0, 0.0);
        for (k, arm) in self.arms.iter().enumerate() {
            let m = n - 1;
            // unknowns u_1..u_{n-1}; u_0 = vertex, u_n = boundary
            let mut lower = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut f_alpha = vec![0.0; m];
            // eta = 1 - (coefficient of u_0), solved directly to avoid cancellation
            let mut f_eta = vec![0.0; m];
            let cell = |j: usize| {
                let dx = self.mesh[j + 1] - self.mesh[j];
                let p = arm.b[j] * dx / arm.a[j];
                let g = arm.a[j] / dx;
                (g * bernoulli(-p), g * bernoulli(p))
            };
            for i in 0..m {
                let j = i + 1;
                let (fwd, _) = cell(j);
                let (_, back) = cell(j - 1);
                diag[i] = -(fwd + back);
                let vol = 0.5 * (self.mesh[j + 1] - self.mesh[j - 1]);
                f_alpha[i] = -arm.r[j] * vol * rhs(k, j);
                if i > 0 {
                    lower[i] = back;
                }
                if i + 1 < m {
                    upper[i] = fwd;
                } else {
                    f_alpha[i] -= fwd * boundary[k];
                    f_eta[i] -= fwd;
                }
            }
            let a_sol = thomas(&lower, &diag, &upper, &f_alpha)?;
            let b_sol = thomas(&lower, &diag, &upper, &f_eta)?;
            let (fwd0, _) = cell(0);
            let w = arm.gamma / arm.a[0];
            let d0 = self.mesh[1] - self.mesh[0];
            let u1_alpha = if m > 0 { a_sol[0] } else { boundary[k] };
            let u1_eta = if m > 0 { b_sol[0] } else { 1.0 };
            // F = fwd0 (u_1 - u_0)
            c0 += w * (fwd0 * u1_alpha + arm.r[0] * 0.5 * d0 * rhs(k, 0));
            c1 -= w * fwd0 * u1_eta;
            alpha.push(a_sol);
            beta.push(b_sol);
        }
        if !(c1.abs() > 0.0) || !c1.is_finite() || !c0.is_finite() {
            return Err(GraphDiffError::SolverSingular { vertex: self.vertex });
        }
        let u0 = -c0 / c1;
        let values = self
            .arms
            .iter()
            .enumerate()
            .map(|(k, _)| {
                let mut v = Vec::with_capacity(n + 1);
                v.push(u0);
                for i in 0..n - 1 {
                    v.push(alpha[k][i] + u0 * (1.0 - beta[k][i]));
                }
                v.push(boundary[k]);
                v
            })
            .collect();
        Ok(StarField {
            edges: self.edges(),
            mesh: self.mesh.clone(),
            values,
        })
    }

    /// Harmonic measure of each arm's outer end.
    pub fn exit_fields(&self) -> Result<Vec<StarField>, GraphDiffError> {
        (0..self.arms.len())
            .map(|k| {
                let bc: Vec<f64> = (0..self.arms.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
                self.solve(&bc, 0.0)
            })
            .collect()
    }

    /// Mean exit time from the star.
    pub fn time_field(&self) -> Result<StarField, GraphDiffError> {
        self.solve(&vec![0.0; self.arms.len()], 1.0)
    }

    /// Second moment of the exit time, given the mean exit time field.
    pub fn second_moment_field(&self, time: &StarField) -> Result<StarField, GraphDiffError> {
        self.solve_with(&vec![0.0; self.arms.len()], |k, j| 2.0 * time.values[k][j])
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>, GraphDiffError> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let denom = diag[i] - if i > 0 { lower[i] * c[i - 1] } else { 0.0 };
        if denom == 0.0 || !denom.is_finite() {
            return Err(GraphDiffError::SolverSingular { vertex: usize::MAX });
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Exit probabilities from the vertex through each attached edge.
pub fn vertex_exit_distribution(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    gluing: &[GluingWeights],
    delta: f64,
    vertex: VertexId,
    h_v: f64,
) -> Result<Vec<(EdgeId, f64)>, GraphDiffError> {
    let star = StarProblem::new(graph, tables, gluing, delta, vertex, h_v, super::STAR_CELLS)?;
    let fields = star.exit_fields()?;
    Ok(star.edges().into_iter().zip(fields.iter().map(|f| f.at_vertex())).collect())
}

/// Mean exit time from the star of radius `h_v` starting at distance `s`
/// from the vertex on `edge` (`None` for the vertex itself).
pub fn mean_exit_time(
    graph: &ReebGraph,
    tables: &[EdgeCoefficientTable],
    gluing: &[GluingWeights],
    delta: f64,
    vertex: VertexId,
    h_v: f64,
    start: Option<(EdgeId, f64)>,
) -> Result<f64, GraphDiffError> {
    let star = StarProblem::new(graph, tables, gluing, delta, vertex, h_v, super::STAR_CELLS)?;
    let w = star.time_field()?;
    Ok(match start {
        None => w.at_vertex(),
        Some((e, s)) => w.at(e, s),
    })
}
