use proptest::prelude::*;
use reebsim::coeffs::*;
use reebsim::graphdiff::*;
use reebsim::models::{DiffusionModel, VectorFieldModel};
use reebsim::morse::{catalog, find_critical_points};
use reebsim::reeb::{build_reeb_grid, GraphPoint, Location, ReebGraph};
use reebsim::stats::binomial_se;
use std::sync::OnceLock;

struct Setup {
    graph: ReebGraph,
    tables: Vec<EdgeCoefficientTable>,
    gluing: Vec<GluingWeights>,
}

fn settings() -> TabulationSettings {
    TabulationSettings {
        mc_samples: 200_000,
        ..Default::default()
    }
}

fn h2(lambda: f64) -> Setup {
    let f = catalog::doublewell1d();
    let cps = find_critical_points(&f, 16, 1e-10, 1e-6).unwrap();
    let graph = build_reeb_grid(&f, &cps.points, &[256, 256], 1.5).unwrap();
    let b = if lambda == 0.0 { VectorFieldModel::zero() } else { VectorFieldModel::momentum_damping(lambda, 1) };
    let m = PerturbationModels::new(DiffusionModel::identity(2), b, VectorFieldModel::zero());
    let tables = tabulate_edges(&graph, &m, &settings()).unwrap();
    let gluing = gluing_weights(&tables, &graph).unwrap();
    Setup { graph, tables, gluing }
}

fn driftless() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| h2(0.0))
}

fn damped() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| h2(0.5))
}

fn saddle(g: &ReebGraph) -> usize {
    g.vertices.iter().find(|v| g.is_interior(v.id)).unwrap().id
}

fn config(s: &Setup, delta: f64, start: GraphPoint) -> GraphDiffusionConfig<'_> {
    GraphDiffusionConfig {
        graph: &s.graph,
        tables: &s.tables,
        gluing: &s.gluing,
        delta,
        t_end: 0.0,
        dt: 1e-4,
        h_v: 0.05,
        start,
        seed: 5,
        trajectory: 0,
        record_every: 1,
    }
}

#[test]
fn driftless_excursions_follow_the_star_solution() {
    let s = driftless();
    let o = saddle(&s.graph);
    let delta = 1e-2;
    let probs = vertex_exit_distribution(&s.graph, &s.tables, &s.gluing, delta, o, 0.05).unwrap();
    let lower: Vec<f64> = probs.iter().filter(|(e, _)| s.graph.edge(*e).upper == Some(o)).map(|p| p.1).collect();
    assert!((lower[0] - lower[1]).abs() < 0.01, "{probs:?}");
    assert!((probs.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-10);
    let n = 5000;
    let mut counts = vec![0usize; probs.len()];
    let start = GraphPoint {
        location: Location::Vertex(o),
        z: s.graph.vertex(o).z,
    };
    for i in 0..n {
        let mut c = config(s, delta, start);
        c.trajectory = i as u64;
        let path = simulate_graph_diffusion(&c).unwrap();
        let e = path.final_point().edge().unwrap();
        counts[probs.iter().position(|p| p.0 == e).unwrap()] += 1;
    }
    for (k, (_, p)) in probs.iter().enumerate() {
        let freq = counts[k] as f64 / n as f64;
        assert!((freq - p).abs() <= 3.0 * binomial_se(counts[k], n).max(1e-3), "edge {k}: {freq} vs {p}");
    }
}

#[test]
fn edge_increments_match_ito_coefficients() {
    let f = catalog::harmonic(2);
    let cps = find_critical_points(&f, 16, 1e-10, 1e-6).unwrap();
    let graph = build_reeb_grid(&f, &cps.points, &[128, 128], 4.0).unwrap();
    let m = PerturbationModels::new(DiffusionModel::identity(2), VectorFieldModel::linear(1.0, 2), VectorFieldModel::zero());
    let tables = tabulate_edges(&graph, &m, &settings()).unwrap();
    let gluing = gluing_weights(&tables, &graph).unwrap();
    let s = Setup { graph, tables, gluing };
    let delta = 1e-2;
    let dt = 1e-3;
    let m_samples = 20_000;
    for k in 0..10 {
        let z0 = 0.2 + 0.3 * k as f64;
        let mut c = config(&s, delta, GraphPoint::on_edge(0, z0));
        c.dt = dt;
        c.h_v = 0.5;
        c.t_end = dt;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..m_samples {
            c.trajectory = i;
            let dz = simulate_graph_diffusion(&c).unwrap().final_point().z - z0;
            s1 += dz;
            s2 += dz * dz;
        }
        let n = m_samples as f64;
        let mean = s1 / n;
        let var = s2 / n - mean * mean;
        // harmonic oscillator: a_bar = 2z, b_bar = -2z, h'/v = 2
        let t = &s.tables[0];
        let drift = delta - 2.0 * z0;
        let diff = delta * t.a_bar(z0);
        let se = (var / n).sqrt();
        assert!((mean - drift * dt).abs() < 4.0 * se + 0.02 * (drift * dt).abs(), "mean at {z0}: {mean}");
        assert!((var / (diff * dt) - 1.0).abs() < 0.05, "variance at {z0}: {var}");
        let r = t.rows_near(z0, 1)[0];
        let rel = r.h_se / r.h + r.v_se / r.v;
        assert!((t.a_bar(z0) / (2.0 * z0) - 1.0).abs() < 4.0 * rel + 0.01, "a_bar at {z0}");
    }
}

#[test]
fn mean_exit_time_is_nonnegative_and_vanishes_on_the_boundary() {
    let s = damped();
    let o = saddle(&s.graph);
    let star = StarProblem::new(&s.graph, &s.tables, &s.gluing, 1e-3, o, 0.05, STAR_CELLS).unwrap();
    let w = star.time_field().unwrap();
    for arm in &w.values {
        assert!(arm.iter().all(|&x| x >= 0.0));
        assert_eq!(*arm.last().unwrap(), 0.0);
    }
    let d = driftless();
    let star = StarProblem::new(&d.graph, &d.tables, &d.gluing, 1e-2, o, 0.05, STAR_CELLS).unwrap();
    let w = star.time_field().unwrap();
    let lower: Vec<usize> = (0..w.edges.len()).filter(|&k| d.graph.edge(w.edges[k]).upper == Some(o)).collect();
    let (a, b) = (&w.values[lower[0]], &w.values[lower[1]]);
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= 0.02 * x.abs().max(1e-12));
    }
}

#[test]
fn exit_probabilities_approach_the_branching_law() {
    let s = damped();
    let o = saddle(&s.graph);
    let cl = classify_vertices(&s.graph, &s.tables, &s.gluing).unwrap();
    let mut gaps = Vec::new();
    for delta in [1e-2, 1e-3, 1e-4] {
        let p = vertex_exit_distribution(&s.graph, &s.tables, &s.gluing, delta, o, 0.05).unwrap();
        let gap = p
            .iter()
            .map(|(e, q)| (q - cl[o].role(*e).unwrap().probability).abs())
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
    assert!(gaps[2] < 0.01);
}

#[test]
fn same_seed_same_graph_path() {
    let s = damped();
    let mut c = config(s, 1e-2, GraphPoint::on_edge(s.graph.open_edge().unwrap(), 0.6));
    c.t_end = 5.0;
    c.record_every = 50;
    let a = simulate_graph_diffusion(&c).unwrap();
    assert_eq!(a, simulate_graph_diffusion(&c).unwrap());
    assert!(!a.excursions.is_empty());
    assert!(a.times.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn oversized_steps_are_rejected() {
    let s = damped();
    let mut c = config(s, 1e-2, GraphPoint::on_edge(0, -0.1));
    c.dt = 0.5;
    assert!(matches!(simulate_graph_diffusion(&c), Err(GraphDiffError::InvalidConfig(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn star_probabilities_form_a_distribution(log_delta in -4.5f64..-1.0, h_v in 0.01f64..0.1) {
        let s = damped();
        let o = saddle(&s.graph);
        let p = vertex_exit_distribution(&s.graph, &s.tables, &s.gluing, 10f64.powf(log_delta), o, h_v).unwrap();
        prop_assert!(p.iter().all(|(_, q)| *q >= -1e-12 && *q <= 1.0 + 1e-12));
        prop_assert!((p.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
