//! The `reeb`, `coeffs`, `branch`, `converge` and `limit` subcommands.

use std::time::Instant;

use reebsim::coeffs::{tables_to_csv, CoefficientSidecar, VertexClassification};
use reebsim::graphdiff::{simulate_graph_diffusion, vertex_exit_distribution, GraphDiffusionConfig};
use reebsim::limit::{expected_observable, limit_distribution, settling_time, simulate_limit, LimitStatus};
use reebsim::morse::check_assumptions;
use reebsim::reeb::{validate, GraphDocument, Location, ReebGraph, ValidationReport, VertexId};
use reebsim::sde::{first_exit_stats, ExitStats, SdeConfig};
use reebsim::stats::wilson;

use crate::config::ExperimentConfig;
use crate::report::{Report, ReportRow, Tolerance};
use crate::scenario::{self, Setup};
use crate::{runtime, HarnessError};

/// Files produced by a subcommand, written after it finishes.
pub type Artifacts = Vec<(String, String)>;

/// Rows for the vertex counting identities and the structural checks.
pub fn counting_rows(exp: &str, name: &str, v: &ValidationReport) -> Vec<ReportRow> {
    let c = &v.counts;
    vec![
        ReportRow::new(exp, format!("{name} merge vertices"), c.merge as f64, c.bottom as f64 - 1.0, "identity", Tolerance::Exact),
        ReportRow::new(exp, format!("{name} split vertices"), c.split as f64, c.top as f64, "identity", Tolerance::Exact),
        ReportRow::new(exp, format!("{name} structural failures"), v.failures.len() as f64, 0.0, "identity", Tolerance::Exact),
    ]
}

pub fn reeb(cfg: &ExperimentConfig) -> Result<(Report, Artifacts), HarnessError> {
    let t0 = Instant::now();
    let field = scenario::field_from(cfg);
    let g = scenario::graph_from(cfg, &field)?;
    let mut rep = Report::default();
    rep.extend(counting_rows("reeb", &cfg.field.name, &validate(&g)));
    rep.stamp("reeb", t0.elapsed().as_secs_f64());
    Ok((rep, vec![("reeb.json".into(), GraphDocument::from_graph(&g).to_json())]))
}

pub fn coeffs(cfg: &ExperimentConfig) -> Result<(Report, Artifacts), HarnessError> {
    let t0 = Instant::now();
    let s = Setup::from_config(cfg)?;
    let mut files = Artifacts::new();
    for t in &s.tables {
        let csv = tables_to_csv(std::slice::from_ref(t)).map_err(|e| runtime("coeffs", e))?;
        files.push((format!("coeffs_{}.csv", t.edge), csv));
    }
    let sidecar = CoefficientSidecar {
        gluing: s.gluing.clone(),
        classifications: s.classes.clone(),
    };
    files.push(("gluing.json".into(), sidecar.to_json()));
    let mut rep = Report::default();
    for c in &s.classes {
        if !s.graph.is_interior(c.vertex) {
            continue;
        }
        let total: f64 = c.exits().map(|r| r.probability).sum();
        rep.push(ReportRow::new("coeffs", format!("v{} branching total", c.vertex), total, 1.0, "identity", Tolerance::Absolute(1e-12)));
        for r in &c.edges {
            rep.push(ReportRow::new(
                "coeffs",
                format!("v{} e{} b_hat/se", c.vertex, r.edge),
                r.b_hat.abs() / r.b_hat_se,
                3.0,
                "bound",
                Tolerance::AtLeast,
            ));
        }
    }
    rep.push(ReportRow::new("coeffs", "edges tabulated", s.tables.len() as f64, s.graph.edges.len() as f64, "identity", Tolerance::Exact));
    rep.stamp("coeffs", t0.elapsed().as_secs_f64());
    Ok((rep, files))
}

/// SDE settings from the `[sde]` block, checked against the admissible
/// `kappa` of the field.
pub fn sde_config(cfg: &ExperimentConfig, s: &Setup, epsilon: f64, x0: Vec<f64>) -> Result<SdeConfig, HarnessError> {
    let mut c = SdeConfig::new(s.field.clone(), s.models.clone(), epsilon, x0);
    c.kappa = cfg.sde.kappa;
    c.delta = cfg.sde.delta;
    c.t_end = cfg.sde.t_end;
    c.dt = cfg.sde.dt.unwrap_or(epsilon / 50.0).min(epsilon / 50.0);
    c.seed = cfg.seed;
    c.record_every = cfg.sde.record_every;
    let criticals: Vec<_> = s.graph.vertices.iter().filter_map(|v| v.critical.clone()).collect();
    let report = check_assumptions(&s.field, &criticals);
    c.validate(Some(report.kappa_max))
        .map_err(|e| HarnessError::ConfigInvalid(format!("sde: {e}")))?;
    Ok(c)
}

pub fn vertex_location(g: &ReebGraph, v: VertexId) -> Result<Vec<f64>, HarnessError> {
    g.vertex(v)
        .critical
        .as_ref()
        .map(|c| c.location.clone())
        .ok_or_else(|| runtime("graph", format!("vertex {v} has no critical point")))
}

/// Frequencies of the exit edges among the trajectories that left through
/// one of them, each checked against the branching probability with a 99%
/// Wilson interval.
pub fn exit_rows(exp: &str, label: &str, stats: &ExitStats, class: &VertexClassification, provenance: &'static str) -> Vec<ReportRow> {
    let exits: Vec<usize> = class.exits().map(|r| r.edge).collect();
    let n: usize = stats
        .edges
        .iter()
        .zip(&stats.counts)
        .filter(|(e, _)| exits.contains(e))
        .map(|(_, k)| k)
        .sum();
    let mut rows = Vec::new();
    for r in class.exits() {
        let k = stats.edges.iter().position(|&e| e == r.edge).map_or(0, |i| stats.counts[i]);
        let (lo, hi) = wilson(k, n, 0.99);
        rows.push(ReportRow::new(
            exp,
            format!("{label}exit frequency e{}", r.edge),
            k as f64 / n.max(1) as f64,
            r.probability,
            provenance,
            Tolerance::Interval(lo, hi),
        ));
    }
    rows
}

fn exit_run(cfg: &ExperimentConfig, s: &Setup, epsilon: f64) -> Result<(ExitStats, VertexId), HarnessError> {
    let v = s.branch_vertex().ok_or_else(|| runtime("branch", "the graph has no interior vertex"))?;
    let entrance = s.classes[v]
        .edges
        .iter()
        .find(|r| !r.exit)
        .map(|r| r.edge)
        .ok_or_else(|| runtime("branch", format!("vertex {v} has no entrance edge")))?;
    let (h_def, h0_def) = scenario::default_exit_radii(&s.field);
    let h = cfg.sde.exit_radius.unwrap_or(h_def);
    let h0 = cfg.sde.start_offset.unwrap_or(h0_def.min(0.5 * h));
    let c = sde_config(cfg, s, epsilon, vertex_location(&s.graph, v)?)?;
    let stats = first_exit_stats(&c, &s.graph, v, entrance, h, h0, cfg.sde.n_traj).map_err(|e| runtime("branch", e))?;
    Ok((stats, v))
}

pub fn branch(cfg: &ExperimentConfig) -> Result<(Report, Artifacts), HarnessError> {
    let t0 = Instant::now();
    let s = Setup::from_config(cfg)?;
    let (stats, v) = exit_run(cfg, &s, cfg.sde.epsilon)?;
    let mut rep = Report::default();
    rep.extend(exit_rows("branch", "", &stats, &s.classes[v], "coefficients"));
    rep.stamp("branch", t0.elapsed().as_secs_f64());
    Ok((rep, vec![("exits.json".into(), stats.to_json())]))
}

/// Largest difference between the star exit distribution at each `delta`
/// and the branching probabilities, checked to shrink along the sweep.
pub fn delta_sweep_rows(exp: &str, s: &Setup, v: VertexId, h_v: f64, deltas: &[f64]) -> Result<Vec<ReportRow>, HarnessError> {
    let class = &s.classes[v];
    let mut rows = Vec::new();
    let mut prev = f64::INFINITY;
    for &d in deltas {
        let dist = vertex_exit_distribution(&s.graph, &s.tables, &s.gluing, d, v, h_v).map_err(|e| runtime("graphdiff", e))?;
        let gap = dist
            .iter()
            .map(|&(e, p)| (p - class.role(e).map_or(0.0, |r| r.probability)).abs())
            .fold(0.0, f64::max);
        if prev.is_finite() {
            rows.push(ReportRow::new(exp, format!("v{v} gap at delta={d:e} below previous"), gap, prev, "trend", Tolerance::Below));
        }
        prev = gap;
    }
    rows.push(ReportRow::new(exp, format!("v{v} final gap"), prev, 0.01, "bound", Tolerance::Below));
    Ok(rows)
}

pub fn converge(cfg: &ExperimentConfig) -> Result<(Report, Artifacts), HarnessError> {
    let t0 = Instant::now();
    let s = Setup::from_config(cfg)?;
    let v = s.branch_vertex().ok_or_else(|| runtime("converge", "the graph has no interior vertex"))?;
    let h_v = cfg.graphdiff.h_v.unwrap_or_else(|| scenario::default_star_radius(&s.field));
    let mut rep = Report::default();
    rep.extend(delta_sweep_rows("converge_delta", &s, v, h_v, &cfg.graphdiff.deltas)?);
    rep.stamp("converge_delta", t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let mut files = Artifacts::new();
    for &eps in &cfg.sde.epsilons {
        let (stats, v) = exit_run(cfg, &s, eps)?;
        rep.extend(exit_rows("converge_epsilon", &format!("eps={eps:e} "), &stats, &s.classes[v], "coefficients"));
        files.push((format!("exits_eps_{eps:e}.json"), stats.to_json()));
    }
    rep.stamp("converge_epsilon", t1.elapsed().as_secs_f64());

    if let Some(start) = s.open_point(cfg.limit.start_offset) {
        let delta = cfg.graphdiff.deltas.iter().copied().fold(f64::INFINITY, f64::min);
        let gc = GraphDiffusionConfig {
            graph: &s.graph,
            tables: &s.tables,
            gluing: &s.gluing,
            delta,
            t_end: cfg.graphdiff.t_end,
            dt: cfg.graphdiff.dt,
            h_v,
            start,
            seed: cfg.seed,
            trajectory: 0,
            record_every: 10,
        };
        let path = simulate_graph_diffusion(&gc).map_err(|e| runtime("graphdiff", e))?;
        files.push(("paths_graphdiff.csv".into(), path.to_csv()));
    }
    Ok((rep, files))
}

/// `1[q1 > 0]` with `q1` the first position coordinate.
pub fn q1_positive(dim: usize) -> impl Fn(&[f64]) -> f64 + Sync + Copy {
    let i = dim / 2;
    move |x: &[f64]| if x[i] > 0.0 { 1.0 } else { 0.0 }
}

pub fn limit(cfg: &ExperimentConfig) -> Result<(Report, Artifacts), HarnessError> {
    let t0 = Instant::now();
    let s = Setup::from_config(cfg)?;
    let y0 = s
        .open_point(cfg.limit.start_offset)
        .ok_or_else(|| runtime("limit", "limit.start_offset puts the start above the ceiling"))?;
    let err = |e| runtime("limit", e);
    let dist = limit_distribution(&s.graph, &s.tables, &s.classes, y0).map_err(err)?;
    let mut files: Artifacts = vec![("limit_dist.json".into(), dist.to_json())];
    let mut rep = Report::default();
    rep.push(ReportRow::new("limit", "total probability", dist.total_probability(), 1.0, "identity", Tolerance::Absolute(1e-12)));

    let n = cfg.limit.n_runs;
    let mut hits = vec![0usize; dist.targets.len()];
    let mut active = 0usize;
    for i in 0..n {
        let path = simulate_limit(&s.graph, &s.tables, &s.classes, y0, cfg.limit.t_end, (cfg.seed << 32) + i as u64).map_err(err)?;
        if i == 0 {
            files.push(("paths_limit.csv".into(), path.to_csv()));
        }
        match path.status {
            LimitStatus::Converged { target, .. } => {
                let k = dist.targets.iter().position(|t| {
                    let p = t.point();
                    p.location == target.location && (p.z - target.z).abs() < 1e-6
                });
                match k {
                    Some(k) => hits[k] += 1,
                    None => return Err(runtime("limit", format!("run {i} converged outside the stable set"))),
                }
            }
            LimitStatus::Active => active += 1,
        }
    }
    rep.push(ReportRow::new("limit", "runs still active at t_end", active as f64, 0.0, "bound", Tolerance::Exact));
    for (t, &k) in dist.targets.iter().zip(&hits) {
        let name = match t.vertex {
            Some(v) => format!("v{v}"),
            None => format!("e{}@{:.6}", t.edge, t.z),
        };
        let se = (t.probability * (1.0 - t.probability) / n as f64).sqrt();
        rep.push(ReportRow::new(
            "limit",
            format!("frequency of {name}"),
            k as f64 / n as f64,
            t.probability,
            "coefficients",
            Tolerance::Absolute(3.0 * se),
        ));
    }
    let t_settle = settling_time(&s.graph, &s.tables, &s.classes, &dist, 1e-3).map_err(err)?;
    rep.push(ReportRow::new("limit", "settling time", t_settle, cfg.limit.t_end, "bound", Tolerance::Below));

    let m = cfg.limit.observable_samples;
    let one = expected_observable(&s.graph, &dist, |_| 1.0, m, cfg.seed).map_err(err)?;
    rep.push(ReportRow::new("limit", "observable 1", one.value, 1.0, "identity", Tolerance::Absolute(1e-12)));
    let f = q1_positive(s.field.dim());
    let est = expected_observable(&s.graph, &dist, f, m, cfg.seed).map_err(err)?;
    if dist.targets.iter().all(|t| t.vertex.is_some()) {
        let reference: f64 = dist
            .targets
            .iter()
            .filter(|t| matches!(t.point().location, Location::Vertex(v) if vertex_location(&s.graph, v).is_ok_and(|x| f(&x) > 0.0)))
            .map(|t| t.probability)
            .sum();
        rep.push(ReportRow::new("limit", "observable 1[q1>0]", est.value, reference, "coefficients", Tolerance::Absolute(1e-12)));
    }
    rep.stamp("limit", t0.elapsed().as_secs_f64());
    Ok((rep, files))
}
