use proptest::prelude::*;
use reebsim::coeffs::*;
use reebsim::graphdiff::{simulate_graph_diffusion, GraphDiffusionConfig};
use reebsim::limit::*;
use reebsim::models::{DiffusionModel, VectorFieldModel};
use reebsim::morse::{catalog, find_critical_points};
use reebsim::reeb::fixture::{self, figure2};
use reebsim::reeb::{build_reeb_grid, build_reeb_separable, GraphPoint, Location, ReebGraph, SublevelTree, VertexType};
use reebsim::stats::binomial_se;
use std::sync::OnceLock;

struct Setup {
    graph: ReebGraph,
    tables: Vec<EdgeCoefficientTable>,
    gluing: Vec<GluingWeights>,
    classes: Vec<VertexClassification>,
}

impl Setup {
    fn new(graph: ReebGraph, tables: Vec<EdgeCoefficientTable>) -> Self {
        let gluing = gluing_weights(&tables, &graph).unwrap();
        let classes = classify_vertices(&graph, &tables, &gluing).unwrap();
        Self { graph, tables, gluing, classes }
    }

    fn open_point(&self, z: f64) -> GraphPoint {
        GraphPoint::on_edge(self.graph.open_edge().unwrap(), z)
    }

    fn interior(&self) -> usize {
        self.graph.vertices.iter().find(|v| self.graph.is_interior(v.id)).unwrap().id
    }
}

fn settings() -> TabulationSettings {
    TabulationSettings {
        mc_samples: 200_000,
        ..Default::default()
    }
}

fn h2() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let f = catalog::doublewell1d();
        let cps = find_critical_points(&f, 16, 1e-10, 1e-6).unwrap();
        let graph = build_reeb_grid(&f, &cps.points, &[256, 256], 1.5).unwrap();
        let m = PerturbationModels::new(DiffusionModel::identity(2), VectorFieldModel::momentum_damping(0.5, 1), VectorFieldModel::zero());
        let tables = tabulate_edges(&graph, &m, &settings()).unwrap();
        Setup::new(graph, tables)
    })
}

const LAMBDA: f64 = 0.5;

fn sep4d() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let sp = catalog::sep4d(0.1);
        let u = sp.separable_parts().unwrap().potential.clone();
        let cps = find_critical_points(&u, 16, 1e-10, 1e-6).unwrap();
        let tree = SublevelTree::build(&u, &cps.points, &[256, 256], 2.5).unwrap();
        let graph = build_reeb_separable(&sp, &tree).unwrap();
        let m = PerturbationModels::new(DiffusionModel::identity(4), VectorFieldModel::momentum_damping(LAMBDA, 2), VectorFieldModel::zero());
        let tables = tabulate_edges(&graph, &m, &settings()).unwrap();
        Setup::new(graph, tables)
    })
}

fn fig2() -> Setup {
    let graph = figure2();
    let tables = synthetic_tables(&graph, 16).unwrap();
    Setup::new(graph, tables)
}

fn table<'a>(s: &'a Setup, e: usize) -> &'a EdgeCoefficientTable {
    s.tables.iter().find(|t| t.edge == e).unwrap()
}

#[test]
fn volume_decays_exponentially_along_segments() {
    let s = sep4d();
    let o = s.interior();
    let y0 = s.open_point(s.graph.vertex(o).z + 0.5);
    for seed in 0..4 {
        let path = simulate_limit(&s.graph, &s.tables, &s.classes, y0, 1e3, seed).unwrap();
        assert!(matches!(path.status, LimitStatus::Converged { .. }));
        assert_eq!(path.branchings.len(), 1);
        for seg in &path.segments {
            let t = table(s, seg.edge);
            let (t0, v0) = (seg.times[0], t.volume(seg.z[0]));
            let mut foldings: f64 = 0.0;
            for (ti, zi) in seg.times.iter().zip(&seg.z) {
                let predicted = v0 * (-2.0 * LAMBDA * (ti - t0)).exp();
                let v = t.volume(*zi);
                if predicted < v0 * (-3.0f64).exp() {
                    break;
                }
                assert!((v / predicted - 1.0).abs() < 0.02, "edge {} t = {ti}: {v} vs {predicted}", seg.edge);
                foldings = foldings.max(2.0 * LAMBDA * (ti - t0));
            }
            if t.domain_exterior {
                assert!(foldings >= 2.0, "edge {} covered {foldings} e-foldings", seg.edge);
            }
        }
    }
}

#[test]
fn symmetric_branching_is_even() {
    let s = h2();
    let o = s.interior();
    let y0 = s.open_point(s.graph.vertex(o).z + 0.2);
    let n = 10_000;
    let exits: Vec<usize> = s.classes[o].exits().map(|r| r.edge).collect();
    let p = s.classes[o].role(exits[0]).unwrap().probability;
    let dist = limit_distribution(&s.graph, &s.tables, &s.classes, y0).unwrap();
    let mut k = 0;
    for seed in 0..n {
        let path = simulate_limit(&s.graph, &s.tables, &s.classes, y0, 50.0, seed as u64).unwrap();
        if path.branchings[0].edge == exits[0] {
            k += 1;
        }
    }
    let freq = k as f64 / n as f64;
    assert!((freq - 0.5).abs() < 0.015, "{freq}");
    assert!((freq - p).abs() < 3.0 * binomial_se(k, n), "{freq} vs {p}");
    assert!((dist.total_probability() - 1.0).abs() < 1e-12);
}

#[test]
fn hitting_time_of_interior_vertex_is_finite_and_stable() {
    let s = h2();
    let o = s.interior();
    let y0 = s.open_point(s.graph.vertex(o).z + 0.1);
    let arrival = |rtol: f64| {
        let set = LimitSettings { rtol, ..Default::default() };
        let mut first = None;
        simulate_limit_with(&s.graph, &s.tables, &s.classes, y0, 50.0, &set, &mut |c| {
            let e = c.exits().next().unwrap().edge;
            Ok((e, 0.0))
        })
        .unwrap()
        .branchings
        .first()
        .map(|b| first.get_or_insert(b.t).to_owned())
        .unwrap()
    };
    let a = arrival(1e-8);
    let b = arrival(5e-9);
    assert!(a.is_finite() && a > 0.0);
    assert!((a / b - 1.0).abs() < 1e-4, "{a} vs {b}");
}

#[test]
fn segments_are_monotone_and_end_where_expected() {
    let s = h2();
    let o = s.interior();
    let vz = s.graph.vertex(o).z;
    let path = simulate_limit(&s.graph, &s.tables, &s.classes, s.open_point(vz + 0.3), 100.0, 3).unwrap();
    assert_eq!(path.segments.len(), 2);
    let first = &path.segments[0];
    assert!((first.z.last().unwrap() - vz).abs() < 1e-8);
    assert!((first.times.last().unwrap() - path.branchings[0].t).abs() < 1e-12);
    let LimitStatus::Converged { target, .. } = path.status else { panic!("not converged") };
    let min = target.vertex().unwrap();
    assert_eq!(s.graph.vertex(min).vtype, VertexType::Bottom);
    for seg in &path.segments {
        assert!(seg.times.windows(2).all(|w| w[1] >= w[0]));
        assert!(seg.z.windows(2).all(|w| w[1] < w[0]));
    }
    let csv = path.to_csv();
    assert!(csv.starts_with("t,edge,z\n"));
}

#[test]
fn stopping_time_truncates_the_path() {
    let s = h2();
    let vz = s.graph.vertex(s.interior()).z;
    let full = simulate_limit(&s.graph, &s.tables, &s.classes, s.open_point(vz + 0.3), 100.0, 1).unwrap();
    let seg = &full.segments[0];
    let k = seg.times.len() / 2;
    let cut = simulate_limit(&s.graph, &s.tables, &s.classes, s.open_point(vz + 0.3), seg.times[k], 1).unwrap();
    assert_eq!(cut.status, LimitStatus::Active);
    let last = cut.segments.last().unwrap();
    assert_eq!(*last.times.last().unwrap(), seg.times[k]);
    assert!((last.z.last().unwrap() - seg.z[k]).abs() < 1e-7, "{} vs {}", last.z.last().unwrap(), seg.z[k]);
}

#[test]
fn figure2_distribution_is_a_product() {
    let s = fig2();
    let v = |n| fixture::vertex(n);
    let e = |n| fixture::edge(n);
    let y0 = GraphPoint::on_edge(e(2), 9.0);
    let dist = limit_distribution(&s.graph, &s.tables, &s.classes, y0).unwrap();
    let p = |vx: usize, ed: usize| s.classes[vx].role(ed).unwrap().probability;
    let p11 = dist.vertex_probability(v(11));
    assert!((p11 - p(v(2), e(7)) * p(v(10), e(11))).abs() < 1e-12);
    assert!((dist.total_probability() - 1.0).abs() < 1e-12);

    let n = 10_000;
    let mut hits = std::collections::HashMap::new();
    for seed in 0..n {
        let path = simulate_limit(&s.graph, &s.tables, &s.classes, y0, 1e3, seed).unwrap();
        let LimitStatus::Converged { target, .. } = path.status else { panic!("not converged") };
        *hits.entry(target.vertex().unwrap()).or_insert(0usize) += 1;
        for b in &path.branchings {
            assert!(s.classes[b.vertex].essential);
        }
    }
    for t in &dist.targets {
        let k = hits.get(&t.vertex.unwrap()).copied().unwrap_or(0);
        let se = (t.probability * (1.0 - t.probability) / n as f64).sqrt();
        assert!((k as f64 / n as f64 - t.probability).abs() <= 3.0 * se + 1e-12, "{:?}: {k}", t.vertex);
    }
    let json = dist.to_json();
    let back: LimitDistribution = serde_json::from_str(&json).unwrap();
    assert_eq!(back.targets.len(), dist.targets.len());
}

#[test]
fn single_well_has_one_target() {
    let f = catalog::harmonic(2);
    let cps = find_critical_points(&f, 16, 1e-10, 1e-6).unwrap();
    let graph = build_reeb_grid(&f, &cps.points, &[128, 128], 4.0).unwrap();
    let m = PerturbationModels::new(DiffusionModel::identity(2), VectorFieldModel::linear(1.0, 2), VectorFieldModel::zero());
    let tables = tabulate_edges(&graph, &m, &settings()).unwrap();
    let s = Setup::new(graph, tables);
    let y0 = s.open_point(2.0);
    let dist = limit_distribution(&s.graph, &s.tables, &s.classes, y0).unwrap();
    assert_eq!(dist.targets.len(), 1);
    assert_eq!(dist.targets[0].probability, 1.0);
    let one = expected_observable(&s.graph, &dist, |_| 1.0, 100, 1).unwrap();
    assert_eq!(one.value, 1.0);
}

#[test]
fn well_indicator_matches_well_mass() {
    let s = sep4d();
    let y0 = s.open_point(s.graph.vertex(s.interior()).z + 0.5);
    let dist = limit_distribution(&s.graph, &s.tables, &s.classes, y0).unwrap();
    let est = expected_observable(&s.graph, &dist, |x| if x[2] > 0.0 { 1.0 } else { 0.0 }, 100, 1).unwrap();
    let right = dist
        .targets
        .iter()
        .filter(|t| s.graph.vertex(t.vertex.unwrap()).critical.as_ref().unwrap().location[2] > 0.0)
        .map(|t| t.probability)
        .sum::<f64>();
    assert!((est.value - right).abs() < 1e-12);
    assert!(right > 0.0 && right < 1.0);
}

#[test]
fn interior_attracting_level_carries_the_level_measure() {
    // b = x (1 - H / z*) on the harmonic oscillator: b_hat = 4 pi z (1 - z / z*)
    let z_star = 1.0;
    let b = VectorFieldModel::new(
        "ring",
        move |x: &[f64], out: &mut [f64]| {
            let h = 0.5 * (x[0] * x[0] + x[1] * x[1]);
            for i in 0..2 {
                out[i] = x[i] * (1.0 - h / z_star);
            }
        },
        move |x: &[f64]| {
            let h = 0.5 * (x[0] * x[0] + x[1] * x[1]);
            2.0 - 4.0 * h / z_star
        },
    );
    let f = catalog::harmonic(2);
    let cps = find_critical_points(&f, 16, 1e-10, 1e-6).unwrap();
    let graph = build_reeb_grid(&f, &cps.points, &[128, 128], 4.0).unwrap();
    let m = PerturbationModels::new(DiffusionModel::identity(2), b, VectorFieldModel::zero());
    let tables = tabulate_edges(&graph, &m, &settings()).unwrap();
    let gluing = gluing_weights(&tables, &graph).unwrap();
    let classes = classify_vertices(&graph, &tables, &gluing).unwrap();
    let e = graph.open_edge().unwrap();
    let y0 = GraphPoint::on_edge(e, 0.3);
    let dist = limit_distribution(&graph, &tables, &classes, y0).unwrap();
    assert_eq!(dist.targets.len(), 1);
    let t = &dist.targets[0];
    assert!(t.vertex.is_none());
    assert!((t.z - z_star).abs() < 0.02, "{}", t.z);
    let est = expected_observable(&graph, &dist, |x| x[0] * x[0], 4000, 3).unwrap();
    assert!((est.value - t.z).abs() < 4.0 * est.se + 2e-3, "{} vs {}", est.value, t.z);
    let path = simulate_limit(&graph, &tables, &classes, y0, 1e3, 0).unwrap();
    let LimitStatus::Converged { target, .. } = path.status else { panic!("not converged") };
    assert_eq!(target.location, Location::Edge(e));
    assert!((target.z - t.z).abs() < 1e-12);
    let t0 = settling_time(&graph, &tables, &classes, &dist, 1e-3).unwrap();
    assert!(t0.is_finite() && t0 > 0.0);
}

#[test]
fn spurious_zero_is_reported() {
    let graph = figure2();
    let mut tables = synthetic_tables(&graph, 16).unwrap();
    let e = fixture::edge(2);
    let ed = graph.edge(e);
    // flat, insignificant b_hat across the middle of the edge
    let rows = (0..=16)
        .map(|k| {
            let z = ed.z_lo + (ed.z_hi - ed.z_lo) * k as f64 / 16.0;
            let b = if (4..=12).contains(&k) { 0.0 } else { -1.0 };
            RawRow {
                z,
                volume: z,
                h: z,
                b_hat: b,
                b_hat_se: if b == 0.0 { 0.5 } else { 0.01 },
                ..Default::default()
            }
        })
        .collect();
    let pos = tables.iter().position(|t| t.edge == e).unwrap();
    tables[pos] = EdgeCoefficientTable::from_raw(&graph, e, rows, None).unwrap();
    let gluing = gluing_weights(&tables, &graph).unwrap();
    let classes = classify_vertices(&graph, &tables, &gluing).unwrap();
    let y0 = GraphPoint::on_edge(e, ed.z_hi - 0.01 * (ed.z_hi - ed.z_lo));
    let err = simulate_limit(&graph, &tables, &classes, y0, 1e3, 0).unwrap_err();
    assert!(matches!(err, LimitError::StuckAtZero { .. }), "{err:?}");
}

#[test]
fn drift_dominated_graph_diffusion_follows_the_flow() {
    let s = h2();
    let o = s.interior();
    let vz = s.graph.vertex(o).z;
    let y0 = s.open_point(vz + 0.4);
    let limit = simulate_limit(&s.graph, &s.tables, &s.classes, y0, 100.0, 0).unwrap();
    let t_hit = limit.branchings[0].t;
    let config = GraphDiffusionConfig {
        graph: &s.graph,
        tables: &s.tables,
        gluing: &s.gluing,
        delta: 1e-4,
        t_end: t_hit,
        dt: 1e-4,
        h_v: 0.05,
        start: y0,
        seed: 9,
        trajectory: 0,
        record_every: 1,
    };
    let path = simulate_graph_diffusion(&config).unwrap();
    let mut worst: f64 = 0.0;
    for (t, p) in path.times.iter().zip(&path.points) {
        if !path.excursions.is_empty() && *t >= path.excursions[0].t_enter {
            break;
        }
        worst = worst.max((p.z - limit.at(*t).z).abs());
    }
    assert!(worst < 0.05, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn figure2_paths_are_well_formed(edge in 0usize..14, frac in 0.05f64..0.95, seed in 0u64..1000) {
        let s = fig2();
        prop_assume!(edge < s.graph.edges.len());
        let ed = s.graph.edge(edge);
        let hi = if ed.is_open() { ed.z_lo + 1.0 } else { ed.z_hi };
        let y0 = GraphPoint::on_edge(edge, ed.z_lo + frac * (hi - ed.z_lo));
        let path = simulate_limit(&s.graph, &s.tables, &s.classes, y0, 1e3, seed).unwrap();
        let converged = matches!(path.status, LimitStatus::Converged { .. });
        prop_assert!(converged);
        let mut last_t = 0.0;
        for seg in &path.segments {
            prop_assert!(seg.z.windows(2).all(|w| w[1] < w[0]));
            prop_assert!(seg.times[0] >= last_t);
            prop_assert!(seg.times.windows(2).all(|w| w[1] >= w[0]));
            last_t = *seg.times.last().unwrap();
        }
        for b in &path.branchings {
            let c = &s.classes[b.vertex];
            prop_assert!(c.essential && c.exits().count() == 2);
        }
        let dist = limit_distribution(&s.graph, &s.tables, &s.classes, y0).unwrap();
        prop_assert!((dist.total_probability() - 1.0).abs() < 1e-12);
        let end = path.final_point();
        prop_assert!(dist.targets.iter().any(|t| t.point() == end));
    }
}

fn shadow_distances(s: &Setup, delta: f64, n: u64) -> Vec<f64> {
    let o = s.interior();
    let y0 = s.open_point(s.graph.vertex(o).z + 0.5);
    let t_end = 4.0;
    (0..n)
        .map(|i| {
            let config = GraphDiffusionConfig {
                graph: &s.graph,
                tables: &s.tables,
                gluing: &s.gluing,
                delta,
                t_end,
                dt: 1e-4,
                h_v: 0.05,
                start: y0,
                seed: 21,
                trajectory: i,
                record_every: 10,
            };
            let gd = simulate_graph_diffusion(&config).unwrap();
            let mut chosen = gd.excursions.iter().map(|x| x.exit_edge);
            let limit = simulate_limit_with(&s.graph, &s.tables, &s.classes, y0, t_end, &LimitSettings::default(), &mut |_| {
                Ok((chosen.next().unwrap(), f64::NAN))
            })
            .unwrap();
            gd.times.iter().zip(&gd.points).map(|(t, p)| (p.z - limit.at(*t).z).abs()).fold(0.0, f64::max)
        })
        .collect()
}

fn median(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    x[x.len() / 2]
}

#[test]
fn graph_diffusion_paths_shadow_the_limit_with_matched_branches() {
    let s = sep4d();
    let n = 20;
    let fine = shadow_distances(s, 1e-5, n);
    let close = fine.iter().filter(|&&d| d < 0.05).count();
    assert!(close as f64 >= 0.9 * n as f64, "{close} of {n}: {fine:?}");
    // fluctuations shrink like sqrt(delta)
    let coarse = median(shadow_distances(s, 1e-4, n));
    let ratio = coarse / median(fine);
    assert!(ratio > 2.0 && ratio < 5.0, "{ratio}");
}
