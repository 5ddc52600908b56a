use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reebsim::morse::{catalog, find_critical_points, symplectic_gradient, ScalarFieldModel};
use reebsim::reeb::fixture::{self, figure2};
use reebsim::reeb::{build_reeb_grid, build_reeb_separable, validate, GraphDocument, Location, ReebError, ReebGraph, SublevelTree, VertexType};
use std::sync::OnceLock;

fn grid(field: &ScalarFieldModel, cells: usize, z_max: f64) -> ReebGraph {
    let cps = find_critical_points(field, 16, 1e-10, 1e-6).unwrap();
    build_reeb_grid(field, &cps.points, &vec![cells; field.dim()], z_max).unwrap()
}

fn lifted(c: f64) -> ReebGraph {
    let f = catalog::sep4d(c);
    let u = f.separable_parts().unwrap().potential.clone();
    let cps = find_critical_points(&u, 16, 1e-10, 1e-6).unwrap();
    let tree = SublevelTree::build(&u, &cps.points, &[256, 256], 2.5).unwrap();
    build_reeb_separable(&f, &tree).unwrap()
}

fn h2() -> &'static ReebGraph {
    static G: OnceLock<ReebGraph> = OnceLock::new();
    G.get_or_init(|| grid(&catalog::doublewell1d(), 512, 1.5))
}

fn types(g: &ReebGraph) -> Vec<(VertexType, f64)> {
    let mut t: Vec<_> = g.vertices.iter().map(|v| (v.vtype, v.z)).collect();
    t.sort_by(|a, b| a.1.total_cmp(&b.1));
    t
}

#[test]
fn one_degree_double_well_graph() {
    let g = h2();
    let t = types(g);
    assert_eq!(t.len(), 3);
    assert_eq!(t[0].0, VertexType::Bottom);
    assert_eq!(t[1].0, VertexType::Bottom);
    assert_eq!(t[2].0, VertexType::Merge);
    assert!((t[0].1 + 0.25).abs() < 1e-9 && (t[1].1 + 0.25).abs() < 1e-9);
    assert!(t[2].1.abs() < 1e-9);
    assert_eq!(g.edges.len(), 3);
    assert_eq!(g.edges.iter().filter(|e| e.is_open()).count(), 1);
    for e in g.edges.iter().filter(|e| !e.is_open()) {
        assert!((e.z_lo + 0.25).abs() < 1e-9 && e.z_hi.abs() < 1e-9);
    }
    let rep = validate(g);
    assert!(rep.passed(), "{:?}", rep.failures);
    assert!(rep.merge_identity && rep.split_identity && rep.is_tree);
}

#[test]
fn harmonic_graph_is_a_single_edge() {
    let g = grid(&catalog::harmonic(2), 128, 4.0);
    assert_eq!(g.vertices.len(), 1);
    assert_eq!(g.vertices[0].vtype, VertexType::Bottom);
    assert_eq!(g.edges.len(), 1);
    assert!(g.edges[0].is_open());
    assert!(validate(&g).passed());
}

#[test]
fn lifted_plane_well_graph() {
    for c in [0.1, 0.0] {
        let g = lifted(c);
        let t = types(&g);
        assert_eq!(t.iter().map(|v| v.0).collect::<Vec<_>>(), vec![VertexType::Bottom, VertexType::Bottom, VertexType::Merge], "c = {c}");
        for v in &g.vertices {
            let cp = v.critical.as_ref().unwrap();
            assert!(cp.location[..2].iter().all(|p| *p == 0.0));
            let k = if v.vtype == VertexType::Merge { 1 } else { 0 };
            assert_eq!(cp.index, k);
        }
        assert!(validate(&g).passed());
        if c == 0.0 {
            assert!((t[2].1 - 1.0).abs() < 1e-12);
            assert!((t[0].1 - t[1].1).abs() < 1e-12);
        }
    }
}

#[test]
fn separable_lift_needs_two_momenta() {
    let f = catalog::doublewell1d();
    let u = f.separable_parts().unwrap().potential.clone();
    let cps = find_critical_points(&u, 16, 1e-10, 1e-6).unwrap();
    let tree = SublevelTree::build(&u, &cps.points, &[256], 1.5).unwrap();
    assert_eq!(build_reeb_separable(&f, &tree).unwrap_err(), ReebError::PDimTooSmall(1));
}

#[test]
fn coarse_lattice_is_rejected() {
    let f = catalog::doublewell1d();
    let cps = find_critical_points(&f, 16, 1e-10, 1e-6).unwrap();
    assert!(matches!(build_reeb_grid(&f, &cps.points, &[16, 16], 1.5), Err(ReebError::ResolutionTooLow { .. })));
}

#[test]
fn branching_fixture_counts() {
    let rep = validate(&figure2());
    assert_eq!((rep.counts.bottom, rep.counts.merge, rep.counts.top, rep.counts.split), (6, 5, 1, 1));
    assert_eq!(rep.counts.pass, 2);
    assert!(rep.passed(), "{:?}", rep.failures);
    let g = figure2();
    assert_eq!(g.vertex(fixture::vertex(7)).vtype, VertexType::Split);
    assert_eq!(g.open_edge(), Some(fixture::edge(1)));
}

#[test]
fn graph_document_round_trip() {
    let g = figure2();
    let doc = GraphDocument::from_graph(&g);
    let back: GraphDocument = serde_json::from_str(&doc.to_json()).unwrap();
    assert_eq!(back, doc);
    let g2 = back.into_graph();
    assert_eq!(g2.vertices.len(), g.vertices.len());
    assert_eq!(g2.edges, g.edges);
}

/// Edge below the merge vertex whose minimum has `q` of the given sign.
fn well_edge(g: &ReebGraph, positive: bool, q_index: usize) -> usize {
    let merge = g.vertices.iter().find(|v| v.vtype == VertexType::Merge).unwrap().id;
    g.edges_below(merge)
        .into_iter()
        .find(|&e| {
            let v = g.domain_vertex(e).unwrap();
            (g.vertex(v).critical.as_ref().unwrap().location[q_index] > 0.0) == positive
        })
        .unwrap()
}

#[test]
fn projection_closed_forms() {
    let g = h2();
    let p = g.project(&[0.0, 0.5]);
    assert_eq!(p.z, -7.0 / 64.0);
    assert_eq!(p.location, Location::Edge(well_edge(g, true, 1)));
    let p = g.project(&[1.0, 0.0]);
    assert_eq!(p.z, 0.5);
    assert_eq!(p.location, Location::Edge(g.open_edge().unwrap()));
    let p = g.project(&[0.0, 0.0]);
    assert!(matches!(p.location, Location::Vertex(_)));
}

#[test]
fn lifted_projection_finds_the_well() {
    let g = lifted(0.1);
    let f = catalog::sep4d(0.1);
    let merge_z = g.vertices.iter().find(|v| v.vtype == VertexType::Merge).unwrap().z;
    let right = well_edge(&g, true, 2);
    let left = well_edge(&g, false, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 200 {
        let x = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.6..1.6),
            rng.random_range(-0.5..0.5),
        ];
        let z = f.value(&x);
        if z >= merge_z - 1e-3 || x[2].abs() < 0.1 {
            continue;
        }
        let want = if x[2] > 0.0 { right } else { left };
        assert_eq!(g.project_edge(&x).0, want, "{x:?}");
        checked += 1;
    }
}

#[test]
fn projection_is_constant_along_orbits() {
    let g = h2();
    let f = catalog::doublewell1d();
    for x0 in [[0.0, -1.3], [0.2, 0.7], [0.9, 0.0]] {
        let e0 = g.project_edge(&x0).0;
        let mut x = x0.to_vec();
        let h = 1e-3;
        let rhs = |y: &[f64]| symplectic_gradient(&f, y).unwrap();
        for _ in 0..10_000 {
            let k1 = rhs(&x);
            let y2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
            let k2 = rhs(&y2);
            let y3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
            let k3 = rhs(&y3);
            let y4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
            let k4 = rhs(&y4);
            for i in 0..2 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            let (e, z) = g.project_edge(&x);
            assert_eq!(e, e0);
            assert!((z - f.value(&x0)).abs() < 1e-8);
        }
    }
}

#[test]
fn lattice_and_lift_agree_in_four_dimensions() {
    let f = catalog::sep4d(0.1);
    let cps = find_critical_points(&f, 8, 1e-10, 1e-6).unwrap();
    let coarse = build_reeb_grid(&f, &cps.points, &[40, 40, 40, 40], 2.5).unwrap();
    let lift = lifted(0.1);
    let a: Vec<VertexType> = types(&coarse).into_iter().map(|t| t.0).collect();
    let b: Vec<VertexType> = types(&lift).into_iter().map(|t| t.0).collect();
    assert_eq!(a, b);
    for (u, v) in types(&coarse).iter().zip(types(&lift)) {
        assert!((u.1 - v.1).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn counting_identities_hold_for_tilted_wells(c in -0.15f64..0.15) {
        prop_assume!(c.abs() > 1e-3);
        let g = grid(&catalog::doublewell1d_tilted(c), 128, 1.5);
        let rep = validate(&g);
        prop_assert!(rep.passed(), "{:?}", rep.failures);
        prop_assert_eq!(rep.counts.merge + 1, rep.counts.bottom);
        prop_assert_eq!(rep.counts.split, rep.counts.top);
        let lift = lifted(c);
        let rep = validate(&lift);
        prop_assert!(rep.passed(), "{:?}", rep.failures);
        prop_assert_eq!(rep.counts.merge + 1, rep.counts.bottom);
    }
}
