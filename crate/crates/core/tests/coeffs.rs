use std::f64::consts::PI;

use proptest::prelude::*;
use reebsim::coeffs::*;
use reebsim::models::{DiffusionModel, VectorFieldModel};
use reebsim::morse::{catalog, find_critical_points};
use reebsim::reeb::{build_reeb_grid, build_reeb_separable, fixture, GraphPoint, ReebGraph, SublevelTree};

fn settings(samples: usize) -> TabulationSettings {
    TabulationSettings {
        mc_samples: samples,
        ..Default::default()
    }
}

fn harmonic_graph() -> ReebGraph {
    let h = catalog::harmonic(2);
    let cps = find_critical_points(&h, 16, 1e-10, 1e-6).unwrap();
    build_reeb_grid(&h, &cps.points, &[128, 128], 4.0).unwrap()
}

fn h2_graph(c: f64) -> ReebGraph {
    let h = catalog::doublewell1d_tilted(c);
    let cps = find_critical_points(&h, 16, 1e-10, 1e-6).unwrap();
    build_reeb_grid(&h, &cps.points, &[256, 256], 1.5).unwrap()
}

fn sep4d_graph(c: f64) -> ReebGraph {
    let s = catalog::sep4d(c);
    let f = s.separable_parts().unwrap().potential.clone();
    let fc = find_critical_points(&f, 16, 1e-10, 1e-6).unwrap();
    let tree = SublevelTree::build(&f, &fc.points, &[256, 256], 2.5).unwrap();
    build_reeb_separable(&s, &tree).unwrap()
}

fn damping(lambda: f64, p_dim: usize, dim: usize) -> PerturbationModels {
    PerturbationModels::new(
        DiffusionModel::identity(dim),
        VectorFieldModel::momentum_damping(lambda, p_dim),
        VectorFieldModel::zero(),
    )
}

#[test]
fn harmonic_oscillator_tables_match_disk_formulas() {
    let g = harmonic_graph();
    let m = PerturbationModels::new(DiffusionModel::identity(2), VectorFieldModel::linear(1.0, 2), VectorFieldModel::zero());
    let tables = tabulate_edges(&g, &m, &settings(200_000)).unwrap();
    assert_eq!(tables.len(), 1);
    let t = &tables[0];
    for z in [1e-3, 1e-2, 0.1, 1.0, 2.5] {
        assert!((t.volume(z) / (2.0 * PI * z) - 1.0).abs() < 0.03, "V at {z}");
        assert!((t.h(z) / (4.0 * PI * z) - 1.0).abs() < 0.03, "h at {z}");
        assert!((t.a_bar(z) / z - 2.0).abs() < 0.1, "a_bar at {z}");
        assert!((t.b_bar(z) / z + 2.0).abs() < 0.1, "b_bar at {z}");
    }
    let gl = gluing_weights(&tables, &g).unwrap();
    assert!(gl[0].weights[0].1.abs() < 1e-3);
}

#[test]
fn z_grid_is_increasing_and_refined_at_both_ends() {
    let g = h2_graph(0.0);
    let s = settings(1);
    for e in 0..g.edges.len() {
        let zs = z_grid(&g, e, &s);
        assert!(zs.windows(2).all(|w| w[0] < w[1]));
        let edge = g.edge(e);
        assert!(zs[0] - edge.z_lo <= 2e-5);
        assert!(zs.iter().all(|&z| z > edge.z_lo && z < edge.z_hi));
        if !edge.is_open() {
            assert!(edge.z_hi - zs[zs.len() - 1] <= 2e-5);
        }
    }
}

#[test]
fn sep4d_constant_divergence_gives_b_hat_equal_minus_volume() {
    let g = sep4d_graph(0.1);
    let tables = tabulate_edges(&g, &damping(0.5, 2, 4), &settings(50_000)).unwrap();
    for t in &tables {
        for r in &t.rows {
            assert!((r.b_hat + r.volume).abs() <= 1e-12 * r.volume.abs().max(1e-300));
        }
        assert!(t.rows.windows(2).all(|w| w[1].volume >= w[0].volume - 3.0 * w[1].volume_se));
    }
    let gl = gluing_weights(&tables, &g).unwrap();
    let cl = classify_vertices(&g, &tables, &gl).unwrap();
    let merge = cl.iter().find(|c| c.essential).expect("essential merge");
    let exits: Vec<_> = merge.exits().collect();
    assert_eq!(exits.len(), 2);
    let (v1, v2) = (exits[0].b_hat.abs(), exits[1].b_hat.abs());
    assert!((exits[0].probability - v1 / (v1 + v2)).abs() < 1e-12);
    let open = g.open_edge().unwrap();
    let ss = stable_set(&g, &tables, &cl, GraphPoint::on_edge(open, 1.5)).unwrap();
    assert_eq!(ss.targets.len(), 2);
    assert!((ss.total_probability() - 1.0).abs() < 1e-15);
}

#[test]
fn h2_saddle_additivity_and_symmetry() {
    let g = h2_graph(0.0);
    let tables = tabulate_edges(&g, &damping(0.5, 1, 2), &settings(200_000)).unwrap();
    let saddle = g.vertices.iter().find(|v| g.is_interior(v.id)).unwrap();
    let lower = g.edges_below(saddle.id);
    let upper = g.edges_above(saddle.id)[0];
    for (col, se) in [
        ((|r: &CoefficientRow| r.volume) as fn(&CoefficientRow) -> f64, (|r: &CoefficientRow| r.volume_se) as fn(&CoefficientRow) -> f64),
        (|r| r.h, |r| r.h_se),
        (|r| r.b_hat, |r| r.b_hat_se),
    ] {
        let val = |e: usize| extrapolate_to_vertex(&tables[e], saddle.z, col).0;
        let err = |e: usize| se(tables[e].rows_near(saddle.z, 1)[0]);
        let combined = (err(lower[0]).powi(2) + err(lower[1]).powi(2) + err(upper).powi(2)).sqrt();
        let gap = val(upper) - val(lower[0]) - val(lower[1]);
        assert!(gap.abs() <= 3.0 * combined, "gap {gap} vs {combined}");
    }
    let gl = gluing_weights(&tables, &g).unwrap();
    let w = &gl[saddle.id];
    let (g1, g2, g3) = (w.gamma(lower[0]).unwrap(), w.gamma(lower[1]).unwrap(), w.gamma(upper).unwrap());
    assert!((g1 - g2).abs() / g3 < 0.02);
    assert!((g3 - g1 - g2).abs() / g3 < 0.02);
    let cl = classify_vertices(&g, &tables, &gl).unwrap();
    let c = &cl[saddle.id];
    assert!(c.essential);
    for r in c.exits() {
        assert!((r.probability - 0.5).abs() < 0.01);
    }
}

#[test]
fn expanding_drift_makes_the_merge_non_essential() {
    let g = h2_graph(0.1);
    let tables = tabulate_edges(&g, &damping(-0.5, 1, 2), &settings(50_000)).unwrap();
    let gl = gluing_weights(&tables, &g).unwrap();
    let cl = classify_vertices(&g, &tables, &gl).unwrap();
    let saddle = g.vertices.iter().find(|v| g.is_interior(v.id)).unwrap();
    let c = &cl[saddle.id];
    assert!(!c.essential);
    let exits: Vec<_> = c.exits().collect();
    assert_eq!(exits.len(), 1);
    assert_eq!(exits[0].edge, g.edges_above(saddle.id)[0]);
    let r = stable_set(&g, &tables, &cl, GraphPoint::on_edge(0, -0.1));
    assert!(matches!(r, Err(CoeffError::AssumptionA8Violated { .. })));
}

fn fixture_setup(scale: f64) -> (ReebGraph, Vec<VertexClassification>, Vec<EdgeCoefficientTable>) {
    let g = fixture::figure2();
    let mut tables = synthetic_tables(&g, 16).unwrap();
    if scale != 1.0 {
        tables = tables
            .into_iter()
            .map(|t| {
                let raw = t
                    .rows
                    .iter()
                    .map(|r| RawRow {
                        z: r.z,
                        volume: r.volume,
                        h: t.sign() * r.h,
                        b_hat: scale * r.b_hat,
                        ..Default::default()
                    })
                    .collect();
                EdgeCoefficientTable::from_raw(&g, t.edge, raw, None).unwrap()
            })
            .collect();
    }
    let gl = gluing_weights(&tables, &g).unwrap();
    let cl = classify_vertices(&g, &tables, &gl).unwrap();
    (g, cl, tables)
}

#[test]
fn figure2_stable_set() {
    let (g, cl, tables) = fixture_setup(1.0);
    let x0 = GraphPoint::on_edge(fixture::edge(2), 9.0);
    let ss = stable_set(&g, &tables, &cl, x0).unwrap();
    let mut targets: Vec<usize> = ss.targets.iter().map(|t| t.vertex.unwrap()).collect();
    targets.sort();
    let expect: Vec<usize> = [5, 6, 11, 12].iter().map(|&n| fixture::vertex(n)).collect();
    assert_eq!(targets, expect);
    let t11 = ss.target_vertex(fixture::vertex(11)).unwrap();
    assert_eq!(t11.essential, vec![fixture::vertex(2), fixture::vertex(10)]);
    assert_eq!(t11.branches, vec![(fixture::vertex(2), fixture::edge(7)), (fixture::vertex(10), fixture::edge(11))]);
    assert!((t11.probability - 0.3).abs() < 1e-12);
    assert!((ss.total_probability() - 1.0).abs() < 1e-15);
    let split = &cl[fixture::vertex(7)];
    assert!(!split.essential);
    assert_eq!(split.exits().map(|r| r.edge).collect::<Vec<_>>(), vec![fixture::edge(9)]);
}

#[test]
fn coefficient_csv_has_header_and_rows() {
    let (_, cl, tables) = fixture_setup(1.0);
    let csv = tables_to_csv(&tables[..1]).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("edge,z,volume,v,h,b_hat,beta_hat,a_bar,b_bar"));
    assert_eq!(lines.count(), tables[0].rows.len());
    let side = CoefficientSidecar {
        gluing: Vec::new(),
        classifications: cl,
    };
    let back: CoefficientSidecar = serde_json::from_str(&side.to_json()).unwrap();
    assert_eq!(back.classifications.len(), side.classifications.len());
    for (a, b) in back.classifications.iter().zip(&side.classifications) {
        assert_eq!(a.essential, b.essential);
        assert_eq!(a.edges.len(), b.edges.len());
    }
}

proptest! {
    #[test]
    fn branching_is_invariant_under_drift_rescaling(scale in 0.01f64..100.0) {
        let (g, base, _) = fixture_setup(1.0);
        let (_, scaled, tables) = fixture_setup(scale);
        for (a, b) in base.iter().zip(&scaled) {
            for (ra, rb) in a.edges.iter().zip(&b.edges) {
                prop_assert_eq!(ra.exit, rb.exit);
                prop_assert!((ra.probability - rb.probability).abs() < 1e-12);
            }
        }
        let ss = stable_set(&g, &tables, &scaled, GraphPoint::on_edge(fixture::edge(2), 9.5)).unwrap();
        prop_assert!((ss.total_probability() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pchip_preserves_monotone_data(ys in proptest::collection::vec(0.0f64..10.0, 3..12)) {
        let mut acc = 0.0;
        let y: Vec<f64> = ys.iter().map(|d| { acc += d; acc }).collect();
        let x: Vec<f64> = (0..y.len()).map(|k| k as f64 * 0.5).collect();
        let p = Pchip::new(x.clone(), y.clone());
        for (xi, yi) in x.iter().zip(&y) {
            prop_assert!((p.eval(*xi) - yi).abs() < 1e-12);
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..200 {
            let t = x[x.len() - 1] * k as f64 / 199.0;
            let v = p.eval(t);
            prop_assert!(v >= prev - 1e-12);
            prop_assert!(p.deriv(t) >= -1e-12);
            prev = v;
        }
    }
}
