use std::f64::consts::PI;

use proptest::prelude::*;
use rand::Rng;
use reebsim::coeffs::PerturbationModels;
use reebsim::models::{DiffusionModel, VectorFieldModel};
use reebsim::morse::{catalog, find_critical_points, ScalarFieldModel};
use reebsim::reeb::{build_reeb_grid, ReebGraph};
use reebsim::rng::{substream, StreamTag};
use reebsim::sde::*;

fn graph(field: &ScalarFieldModel, z_max: f64) -> ReebGraph {
    let cps = find_critical_points(field, 16, 1e-10, 1e-6).unwrap();
    build_reeb_grid(field, &cps.points, &[256, 256], z_max).unwrap()
}

fn quiet(dim: usize) -> PerturbationModels {
    PerturbationModels::new(DiffusionModel::identity(dim), VectorFieldModel::zero(), VectorFieldModel::zero())
}

#[test]
fn sigma1_annihilates_the_gradient() {
    let h2 = catalog::doublewell1d();
    let mut rng = substream(3, StreamTag::Oracle, 0);
    for _ in 0..10_000 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let s = make_sigma1(&h2, &x);
        let a = &s * s.transpose();
        let g = nalgebra::DVector::from_vec(h2.gradient_vec(&x));
        assert!((&a * &g).norm() <= 1e-12 * (1.0 + g.norm().powi(3)));
    }
    let h = catalog::harmonic(2);
    let s = make_sigma1(&h, &[1.0, 0.0]);
    assert!((s[(0, 0)]).abs() < 1e-15 && (s[(1, 1)] - 1.0).abs() < 1e-15 && s[(0, 1)] == 0.0);
    assert_eq!(make_sigma1(&h, &[0.0, 0.0]).norm(), 0.0);
}

#[test]
fn sigma1_vanishes_quadratically_at_criticals() {
    // near the H2 saddle the largest eigenvalue of a1 is |grad H|^2 <= |Hess|^2 r^2
    let h2 = catalog::doublewell1d();
    let mut rng = substream(4, StreamTag::Oracle, 0);
    let mut k2: f64 = 0.0;
    for _ in 0..2000 {
        let r = rng.random_range(1e-4..1e-2);
        let th = rng.random_range(0.0..2.0 * PI);
        let x = [r * th.cos(), r * th.sin()];
        let s = make_sigma1(&h2, &x);
        let a = &s * s.transpose();
        let lmax = a.symmetric_eigenvalues().max();
        k2 = k2.max(lmax / (r * r));
    }
    assert!((k2 - 1.0).abs() < 0.03, "fitted k2 = {k2}");
}

#[test]
fn kappa_process_conserves_energy() {
    for (field, x0) in [(catalog::doublewell1d(), vec![0.3, 0.8]), (catalog::sep4d(0.1), vec![0.3, 0.2, 0.5, 0.1])] {
        let d = field.dim();
        let g = if d == 2 { graph(&field, 1.5) } else { reebsim::reeb::ReebGraph::from_parts(vec![], vec![], 2.5) };
        let mut c = SdeConfig::new(field.clone(), quiet(d), 1e-2, x0);
        c.kappa = 0.05;
        c.dt = 1e-4;
        c.t_end = 1.0;
        c.record_every = 1;
        let p = simulate_full(&c, &g).unwrap();
        let h0 = p.energies[0];
        assert!(p.max_energy_deviation() < 1e-3 * h0.abs().max(1.0), "{}: {}", field.name, p.max_energy_deviation());
    }
}

#[test]
fn harmonic_orbit_closes_after_one_period() {
    let h = catalog::harmonic(2);
    let g = graph(&h, 4.0);
    let eps = 1e-2;
    let n = 6283;
    let mut c = SdeConfig::new(h, quiet(2), eps, vec![1.0, 0.0]);
    c.dt = 2.0 * PI * eps / n as f64;
    c.t_end = 2.0 * PI * eps;
    c.record_every = n;
    let p = simulate_full(&c, &g).unwrap();
    let last = p.states.last().unwrap();
    let err = ((last[0] - 1.0).powi(2) + last[1].powi(2)).sqrt();
    assert!(err < 1e-6, "closure error {err}");
}

#[test]
fn same_seed_gives_identical_paths() {
    let h2 = catalog::doublewell1d();
    let g = graph(&h2, 1.5);
    let m = PerturbationModels::new(DiffusionModel::identity(2), VectorFieldModel::momentum_damping(0.5, 1), VectorFieldModel::zero());
    let mut c = SdeConfig::new(h2, m, 1e-2, vec![0.5, 0.5]);
    c.kappa = 0.05;
    c.delta = 1e-2;
    c.t_end = 0.5;
    let a = simulate_full(&c, &g).unwrap();
    let b = simulate_full(&c, &g).unwrap();
    assert_eq!(a, b);
    c.seed = 2;
    assert_ne!(a, simulate_full(&c, &g).unwrap());
}

#[test]
fn slow_time_rescaling_matches_fast_time() {
    let h2 = catalog::doublewell1d();
    let g = graph(&h2, 1.5);
    let eps = 1e-2;
    let mut slow = SdeConfig::new(h2.clone(), quiet(2), eps, vec![0.2, 0.9]);
    slow.dt = eps / 100.0;
    slow.t_end = 0.5;
    let mut fast = SdeConfig::new(h2, quiet(2), 1.0, vec![0.2, 0.9]);
    fast.dt = 1.0 / 100.0;
    fast.t_end = 0.5 / eps;
    let a = simulate_full(&slow, &g).unwrap();
    let b = simulate_full(&fast, &g).unwrap();
    for (x, y) in a.states.last().unwrap().iter().zip(b.states.last().unwrap()) {
        assert!((x - y).abs() < 1e-10);
    }
}

/// `L u` for `u = x0 x1 + 0.3 x1^2` under H2 with `a2 = I`, `b = (-lambda p, 0)`.
fn generator(field: &ScalarFieldModel, x: &[f64], eps: f64, kappa: f64, delta: f64, lambda: f64) -> f64 {
    let g = field.gradient_vec(x);
    let h = field.hessian_vec(x);
    let du = [x[1], x[0] + 0.6 * x[1]];
    let d2u = [0.0, 1.0, 1.0, 0.6];
    let fast = (-g[1] * du[0] + g[0] * du[1]) / eps;
    let g2 = g[0] * g[0] + g[1] * g[1];
    let a1 = [g2 - g[0] * g[0], -g[0] * g[1], -g[1] * g[0], g2 - g[1] * g[1]];
    let lap = h[0] + h[3];
    let hg = [h[0] * g[0] + h[1] * g[1], h[2] * g[0] + h[3] * g[1]];
    let bt = [hg[0] - g[0] * lap, hg[1] - g[1] * lap];
    let a1_d2u: f64 = (0..4).map(|k| a1[k] * d2u[k]).sum();
    let kap = 0.5 * kappa / eps * (a1_d2u + bt[0] * du[0] + bt[1] * du[1]);
    let drift = -lambda * x[0] * du[0];
    let diff = 0.5 * delta * (d2u[0] + d2u[3]);
    fast + kap + drift + diff
}

#[test]
fn empirical_generator_matches_operator() {
    let h2 = catalog::doublewell1d();
    let (eps, kappa, delta, lambda) = (1.0, 0.05, 0.1, 0.5);
    let m = PerturbationModels::new(DiffusionModel::identity(2), VectorFieldModel::momentum_damping(lambda, 1), VectorFieldModel::zero());
    let mut c = SdeConfig::new(h2.clone(), m, eps, vec![0.0, 0.0]);
    c.kappa = kappa;
    c.delta = delta;
    c.dt = 5e-3;
    let u = |x: &[f64]| x[0] * x[1] + 0.3 * x[1] * x[1];
    let mut rng = substream(11, StreamTag::Oracle, 0);
    let probes: Vec<[f64; 2]> = (0..10).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.5..1.5)]).collect();
    let m_samples = 100_000;
    for (k, p) in probes.iter().enumerate() {
        let mut srng = substream(12, StreamTag::Oracle, k as u64);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m_samples {
            let mut x = p.to_vec();
            step_once(&c, 10.0, &mut x, &mut srng).unwrap();
            let du = (u(&x) - u(p)) / c.dt;
            s += du;
            s2 += du * du;
        }
        let n = m_samples as f64;
        let mean = s / n;
        let se = ((s2 / n - mean * mean) / n).sqrt();
        let exact = generator(&h2, p, eps, kappa, delta, lambda);
        let tol = 4.0 * se + 2.0 * c.dt * (1.0 + exact.abs());
        assert!((mean - exact).abs() < tol, "probe {p:?}: {mean} vs {exact} (se {se})");
    }
}

#[test]
fn harmonic_level_average_of_x_squared() {
    let h = catalog::harmonic(2);
    let g = graph(&h, 4.0);
    let z: f64 = 0.8;
    let mut c = SdeConfig::new(h, quiet(2), 1e-2, vec![(2.0 * z).sqrt(), 0.0]);
    c.kappa = 0.05;
    c.t_end = 10.0;
    let avg = ergodic_average(&c, &g, |x| x[0] * x[0]).unwrap();
    assert!((avg - z).abs() / z < 0.01, "{avg}");
    assert!((ergodic_average(&c, &g, |_| 1.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn exit_statistics_do_not_depend_on_thread_count() {
    let h2 = catalog::doublewell1d();
    let g = graph(&h2, 1.5);
    let m = PerturbationModels::new(DiffusionModel::identity(2), VectorFieldModel::momentum_damping(0.5, 1), VectorFieldModel::zero());
    let mut c = SdeConfig::new(h2, m, 1e-2, vec![0.0, 0.0]);
    c.kappa = 0.05;
    c.delta = 1e-2;
    c.t_end = 20.0;
    let saddle = g.vertices.iter().find(|v| g.is_interior(v.id)).unwrap().id;
    let up = g.edges_above(saddle)[0];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| first_exit_stats(&c, &g, saddle, up, 0.1, 0.02, 40).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    assert_eq!(a.timeouts, 0);
    assert_eq!(a.counts.iter().sum::<usize>() + a.stray, 40);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn kappa_step_stays_on_the_level(p in -1.0f64..1.0, q in -1.6f64..1.6, seed in 0u64..1000) {
        let h2 = catalog::doublewell1d();
        let mut c = SdeConfig::new(h2.clone(), quiet(2), 1e-2, vec![p, q]);
        c.kappa = 0.05;
        let mut rng = substream(seed, StreamTag::Oracle, 0);
        let mut x = vec![p, q];
        let h0 = h2.value(&x);
        step_once(&c, 10.0, &mut x, &mut rng).unwrap();
        prop_assert!((h2.value(&x) - h0).abs() < 1e-5 * h0.abs().max(1.0));
    }
}
