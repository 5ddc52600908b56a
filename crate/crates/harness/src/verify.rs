//! The acceptance suite behind `verify`.
//!
//! Each criterion builds on a few fixed scenarios (the symmetric one-degree
//! double well, the tilted two-degree double well, the harmonic oscillator
//! and the branching fixture). Only the seed, the `[coeffs]` sample sizes
//! and the `[verify]` switches come from the configuration.

use std::cell::{Cell, OnceCell};
use std::time::Instant;

use reebsim::coeffs::TabulationSettings;
use reebsim::graphdiff::{mean_exit_time, vertex_exit_distribution};
use reebsim::limit::{expected_observable, limit_distribution, simulate_limit};
use reebsim::morse::catalog;
use reebsim::reeb::{fixture, validate, GraphPoint, ReebGraph, VertexId};
use reebsim::rng::{substream, StreamTag};
use reebsim::sde::{ergodic_average, first_exit_stats, sample_level_point, simulate_full, terminal_average, thin_shell_average, SdeConfig};
use reebsim::stats::binomial_se;

use crate::commands::{counting_rows, delta_sweep_rows, exit_rows, q1_positive, vertex_location};
use crate::config::ExperimentConfig;
use crate::oracle;
use crate::report::{Report, ReportRow, Tolerance};
use crate::scenario::{build_graph, damped, Setup};
use crate::{runtime, HarnessError};

/// Runtime budget of each criterion in seconds.
pub fn budget(criterion: u32) -> Option<f64> {
    Some(match criterion {
        1 => 10.0,
        2 => 60.0,
        3 => 120.0,
        4 => 1800.0,
        5 => 60.0,
        6 => 60.0,
        7 => 300.0,
        8 => 1.0,
        9 => 3600.0,
        _ => return None,
    })
}

/// Criterion number of an experiment id such as `c4b_branch_sep4d`.
pub fn criterion_of(experiment: &str) -> Option<u32> {
    let digits: String = experiment.strip_prefix('c')?.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

const LAMBDA: f64 = 0.5;

struct Scenarios {
    settings: TabulationSettings,
    /// Seconds spent building setups, kept out of criterion runtimes.
    build_seconds: Cell<f64>,
    h2: OnceCell<Setup>,
    h2_growing: OnceCell<Setup>,
    sep4d: OnceCell<Setup>,
    harmonic: OnceCell<Setup>,
}

impl Scenarios {
    fn get<'a>(&self, cell: &'a OnceCell<Setup>, make: impl FnOnce() -> Result<Setup, HarnessError>) -> Result<&'a Setup, HarnessError> {
        if let Some(s) = cell.get() {
            return Ok(s);
        }
        let t0 = Instant::now();
        let s = make()?;
        self.build_seconds.set(self.build_seconds.get() + t0.elapsed().as_secs_f64());
        Ok(cell.get_or_init(|| s))
    }

    fn h2_with(&self, lambda: f64) -> Result<Setup, HarnessError> {
        let f = catalog::doublewell1d();
        let g = build_graph(&f, &[512, 512], 1.5)?;
        let m = damped(&f, lambda);
        Setup::build(f, g, m, &self.settings)
    }

    fn h2(&self) -> Result<&Setup, HarnessError> {
        self.get(&self.h2, || self.h2_with(LAMBDA))
    }

    fn h2_growing(&self) -> Result<&Setup, HarnessError> {
        self.get(&self.h2_growing, || self.h2_with(-LAMBDA))
    }

    fn sep4d(&self) -> Result<&Setup, HarnessError> {
        self.get(&self.sep4d, || {
            let f = catalog::sep4d(0.1);
            let g = build_graph(&f, &[256, 256], 2.5)?;
            let m = damped(&f, LAMBDA);
            Setup::build(f, g, m, &self.settings)
        })
    }

    fn harmonic(&self) -> Result<&Setup, HarnessError> {
        self.get(&self.harmonic, || {
            let f = catalog::harmonic(2);
            let g = build_graph(&f, &[256, 256], 4.0)?;
            let m = damped(&f, LAMBDA);
            Setup::build(f, g, m, &self.settings)
        })
    }
}

fn interior(g: &ReebGraph) -> Result<VertexId, HarnessError> {
    g.vertices
        .iter()
        .find(|v| g.is_interior(v.id))
        .map(|v| v.id)
        .ok_or_else(|| runtime("verify", "scenario has no interior vertex"))
}

struct Suite<'a> {
    cfg: &'a ExperimentConfig,
    sc: Scenarios,
}

impl Suite<'_> {
    fn reduced(&self) -> bool {
        self.cfg.verify.reduced
    }

    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn c1(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c1_reeb_counts";
        let mut rows = Vec::new();
        let h2 = build_graph(&catalog::doublewell1d(), &[512, 512], 1.5)?;
        rows.extend(counting_rows(exp, "H2", &validate(&h2)));
        for c in [0.0, 0.1] {
            let g = build_graph(&catalog::sep4d(c), &[256, 256], 2.5)?;
            rows.extend(counting_rows(exp, &format!("sep4d(c={c})"), &validate(&g)));
        }
        rows.extend(counting_rows(exp, "figure2", &validate(&fixture::figure2())));
        Ok(rows)
    }

    fn quiet(&self, field: reebsim::ScalarFieldModel, x0: Vec<f64>, eps: f64) -> SdeConfig {
        let m = reebsim::coeffs::PerturbationModels::new(
            reebsim::models::DiffusionModel::identity(field.dim()),
            reebsim::models::VectorFieldModel::zero(),
            reebsim::models::VectorFieldModel::zero(),
        );
        let mut c = SdeConfig::new(field, m, eps, x0);
        c.kappa = 0.05;
        c.seed = self.seed();
        c
    }

    fn c2(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c2_energy";
        let mut rows = Vec::new();
        for (name, field, x0, z_max) in [
            ("H2", catalog::doublewell1d(), vec![0.3, 0.8], 1.5),
            ("sep4d", catalog::sep4d(0.1), vec![0.3, 0.2, 0.5, 0.1], 2.5),
        ] {
            let mut c = self.quiet(field, x0, 1e-2);
            c.dt = 1e-4;
            c.t_end = 1.0;
            c.record_every = 1;
            let g = ReebGraph::from_parts(Vec::new(), Vec::new(), z_max);
            let p = simulate_full(&c, &g).map_err(|e| runtime("sde", e))?;
            let bound = 1e-3 * p.energies[0].abs().max(1.0);
            rows.push(ReportRow::new(exp, format!("{name} max |H - H0|"), p.max_energy_deviation(), bound, "bound", Tolerance::Below));
        }
        Ok(rows)
    }

    fn c3(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c3_ergodic";
        let s = self.sc.h2()?;
        let z = -0.05;
        let q_outer = -(1.0 + (1.0f64 + 4.0 * z).sqrt()).sqrt();
        let mut c = self.quiet(s.field.clone(), vec![0.0, q_outer], 1e-2);
        c.dt = 1e-4;
        c.t_end = if self.reduced() { 10.0 } else { 50.0 };
        let time_avg = ergodic_average(&c, &s.graph, |x| x[1]).map_err(|e| runtime("sde", e))?;
        let exact = oracle::doublewell_orbit_average(z, |q| q);
        let edge = s
            .graph
            .project(&[0.0, q_outer])
            .edge()
            .ok_or_else(|| runtime("verify", "start point projects onto a vertex"))?;
        let mut rng = substream(self.seed(), StreamTag::Oracle, 1000);
        let hits = if self.reduced() { 20_000 } else { 200_000 };
        let shell = thin_shell_average(&s.graph, edge, z, 1e-3, |x| x[1], hits, 1000 * hits, &mut rng);
        Ok(vec![
            ReportRow::new(exp, "time average of q vs shell", time_avg, shell.mean, "oracle", Tolerance::Relative(0.02)),
            ReportRow::new(exp, "time average of q vs quadrature", time_avg, exact, "analytic", Tolerance::Relative(0.02)),
            ReportRow::new(exp, "shell average of q vs quadrature", shell.mean, exact, "analytic", Tolerance::Relative(0.02)),
        ])
    }

    fn exit_config(&self, s: &Setup, v: VertexId, eps: f64) -> Result<SdeConfig, HarnessError> {
        let mut c = SdeConfig::new(s.field.clone(), s.models.clone(), eps, vertex_location(&s.graph, v)?);
        c.kappa = 0.05;
        c.delta = 1e-2;
        c.dt = eps / 50.0;
        c.t_end = 20.0;
        c.seed = self.seed();
        Ok(c)
    }

    fn n_exit(&self) -> usize {
        if self.reduced() {
            200
        } else {
            2000
        }
    }

    fn c4a(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c4a_branch_symmetric";
        let s = self.sc.h2()?;
        let v = interior(&s.graph)?;
        let up = s.graph.edges_above(v)[0];
        let c = self.exit_config(s, v, 1e-3)?;
        let stats = first_exit_stats(&c, &s.graph, v, up, 0.1, 0.02, self.n_exit()).map_err(|e| runtime("sde", e))?;
        let mut rows = exit_rows(exp, "", &stats, &s.classes[v], "symmetry");
        for r in &mut rows {
            r.reference = 0.5;
            r.pass = r.tolerance.passes(r.value, r.reference);
        }
        Ok(rows)
    }

    fn c4b(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c4b_branch_sep4d";
        let s = self.sc.sep4d()?;
        let v = interior(&s.graph)?;
        let up = s.graph.edges_above(v)[0];
        let samples = if self.reduced() { 1_000_000 } else { 10_000_000 };
        let vol = oracle::sep4d_well_volumes(0.1, samples, self.seed());
        let c = self.exit_config(s, v, 1e-3)?;
        let stats = first_exit_stats(&c, &s.graph, v, up, 0.3, 0.1, self.n_exit()).map_err(|e| runtime("sde", e))?;
        let below = s.graph.edges_below(v);
        let n: usize = below.iter().map(|e| stats.edges.iter().position(|x| x == e).map_or(0, |i| stats.counts[i])).sum();
        let mut rows = Vec::new();
        for &e in &below {
            let bottom = s
                .graph
                .domain_vertex(e)
                .ok_or_else(|| runtime("verify", format!("edge {e} has no domain vertex")))?;
            let q1 = vertex_location(&s.graph, bottom)?[2];
            let p = if q1 < vol.q1_saddle { vol.left_fraction } else { 1.0 - vol.left_fraction };
            let k = stats.edges.iter().position(|&x| x == e).map_or(0, |i| stats.counts[i]);
            let tol = 3.0 * binomial_se(k, n) + vol.fraction_se;
            rows.push(ReportRow::new(exp, format!("exit frequency e{e}"), k as f64 / n as f64, p, "oracle", Tolerance::Absolute(tol)));
            let pc = s.classes[v].role(e).map_or(f64::NAN, |r| r.probability);
            rows.push(ReportRow::new(exp, format!("branching probability e{e}"), pc, p, "oracle", Tolerance::Absolute(0.01)));
        }
        Ok(rows)
    }

    fn c5(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c5_exit_trend";
        let deltas = [1e-2, 1e-3, 1e-4];
        let s = self.sc.sep4d()?;
        let mut rows = delta_sweep_rows(exp, s, interior(&s.graph)?, 0.1, &deltas)?;
        let s = self.sc.h2_growing()?;
        let v = interior(&s.graph)?;
        let exits: Vec<_> = s.classes[v].exits().map(|r| r.edge).collect();
        if exits.len() != 1 {
            return Err(runtime("verify", format!("expected one exit edge at v{v}, found {}", exits.len())));
        }
        let dist = vertex_exit_distribution(&s.graph, &s.tables, &s.gluing, deltas[2], v, 0.05).map_err(|e| runtime("graphdiff", e))?;
        let p = dist.iter().find(|d| d.0 == exits[0]).map_or(0.0, |d| d.1);
        rows.push(ReportRow::new(exp, format!("single exit e{} at delta=1e-4", exits[0]), p, 0.99, "bound", Tolerance::AtLeast));
        Ok(rows)
    }

    fn c6(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c6_exit_time";
        let s = self.sc.h2()?;
        let v = interior(&s.graph)?;
        let mut ratios = Vec::new();
        for h in [0.02, 0.04, 0.08] {
            let w = mean_exit_time(&s.graph, &s.tables, &s.gluing, 1e-3, v, h, None).map_err(|e| runtime("graphdiff", e))?;
            ratios.push(w / (h * f64::ln(h).abs()));
        }
        let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
        let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
        Ok(vec![ReportRow::new(exp, "spread of w/(h|ln h|)", hi / lo, 2.0, "bound", Tolerance::Below)])
    }

    fn c7(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c7_log_asymptotics";
        let mut rows = Vec::new();
        let s = self.sc.h2()?;
        let v = interior(&s.graph)?;
        let zv = s.graph.vertex(v).z;
        for e in s.graph.incident(v) {
            let t = s.table(e);
            let near: Vec<_> = t
                .rows
                .iter()
                .map(|r| (r, (r.z - zv).abs()))
                .filter(|(_, d)| (1e-4 * (1.0 - 1e-9)..=1e-2 * (1.0 + 1e-9)).contains(d))
                .collect();
            for (name, col) in [("b_bar", 0usize), ("a_bar", 1)] {
                let vals: Vec<f64> = near
                    .iter()
                    .map(|(r, d)| if col == 0 { r.b_bar.abs() } else { r.a_bar } * d.ln().abs())
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let hi = vals.iter().copied().fold(f64::MIN, f64::max);
                let lo = vals.iter().copied().fold(f64::MAX, f64::min);
                rows.push(ReportRow::new(
                    exp,
                    format!("e{e} spread of {name}*|ln s| over {} levels", vals.len()),
                    (hi - lo) / mean,
                    0.15,
                    "bound",
                    Tolerance::Below,
                ));
            }
        }
        let s = self.sc.harmonic()?;
        let t = &s.tables[0];
        let worst = t
            .rows
            .iter()
            .map(|r| r.a_bar / r.z)
            .max_by(|a, b| (a - 2.0).abs().total_cmp(&(b - 2.0).abs()))
            .unwrap_or(f64::NAN);
        rows.push(ReportRow::new(exp, "harmonic worst a_bar/z", worst, 2.0, "analytic", Tolerance::Relative(0.05)));
        Ok(rows)
    }

    fn c8(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c8_volume_law";
        let s = self.sc.sep4d()?;
        let o = interior(&s.graph)?;
        let y0 = GraphPoint::on_edge(s.graph.open_edge().expect("open edge"), s.graph.vertex(o).z + 0.5);
        let mut worst: f64 = 0.0;
        let mut foldings_min = f64::INFINITY;
        for run in 0..4 {
            let path = simulate_limit(&s.graph, &s.tables, &s.classes, y0, 1e3, (self.seed() << 8) + run).map_err(|e| runtime("limit", e))?;
            for seg in &path.segments {
                let t = s.table(seg.edge);
                let (t0, v0) = (seg.times[0], t.volume(seg.z[0]));
                let mut foldings: f64 = 0.0;
                for (ti, zi) in seg.times.iter().zip(&seg.z) {
                    let predicted = v0 * (-2.0 * LAMBDA * (ti - t0)).exp();
                    if predicted < v0 * (-3.0f64).exp() {
                        break;
                    }
                    worst = worst.max((t.volume(*zi) / predicted - 1.0).abs());
                    foldings = foldings.max(2.0 * LAMBDA * (ti - t0));
                }
                if t.domain_exterior {
                    foldings_min = foldings_min.min(foldings);
                }
            }
        }
        Ok(vec![
            ReportRow::new(exp, "worst relative volume error", worst, 0.02, "analytic", Tolerance::Below),
            ReportRow::new(exp, "e-foldings covered", foldings_min, 2.0, "bound", Tolerance::AtLeast),
        ])
    }

    fn c9(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c9_observable";
        let s = self.sc.sep4d()?;
        let o = interior(&s.graph)?;
        let open = s.graph.open_edge().expect("open edge");
        let z0 = s.graph.vertex(o).z + 0.5;
        let dist = limit_distribution(&s.graph, &s.tables, &s.classes, GraphPoint::on_edge(open, z0)).map_err(|e| runtime("limit", e))?;
        let f = q1_positive(4);
        let exact = expected_observable(&s.graph, &dist, f, 1, self.seed()).map_err(|e| runtime("limit", e))?;
        let mut rng = substream(self.seed(), StreamTag::ExitStart, 0);
        let x0 = sample_level_point(&s.graph, open, z0, 1e-3, &mut rng, 50_000_000).ok_or_else(|| runtime("sde", "no start point"))?;
        let eps = 1e-4;
        let mut c = SdeConfig::new(s.field.clone(), s.models.clone(), eps, x0);
        c.kappa = 0.05;
        c.delta = 1e-2;
        c.dt = eps / 50.0;
        c.t_end = if self.reduced() { 2.0 } else { 20.0 };
        c.seed = self.seed();
        let n = if self.reduced() { 20 } else { 500 };
        let mc = terminal_average(&c, &s.graph, n, f).map_err(|e| runtime("sde", e))?;
        Ok(vec![ReportRow::new(exp, "E 1[q1>0] at T", mc.mean, exact.value, "coefficients", Tolerance::Absolute(0.1))])
    }

    fn c10(&self) -> Result<Vec<ReportRow>, HarnessError> {
        let exp = "c10_determinism";
        let mut sub = self.cfg.clone();
        sub.verify = crate::config::VerifyBlock {
            slow: false,
            reduced: true,
            criteria: vec![2, 4, 5, 8],
        };
        sub.coeffs.mc_samples = sub.coeffs.mc_samples.min(100_000);
        let run = |threads: usize| -> Result<String, HarnessError> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| runtime("verify", e))?;
            Ok(pool.install(|| run(&sub)).to_csv())
        };
        let a = run(1)?;
        let b = run(4)?;
        Ok(vec![ReportRow::new(exp, "report identical for 1 and 4 threads", f64::from(u8::from(a == b)), 1.0, "identity", Tolerance::Exact)])
    }
}

/// Runs the selected criteria. Module errors become failed rows so that the
/// remaining criteria still run.
pub fn run(cfg: &ExperimentConfig) -> Report {
    let mut settings = crate::scenario::tabulation(cfg);
    if cfg.verify.reduced {
        settings.mc_samples = settings.mc_samples.min(100_000);
    }
    let suite = Suite {
        cfg,
        sc: Scenarios {
            settings,
            build_seconds: Cell::new(0.0),
            h2: OnceCell::new(),
            h2_growing: OnceCell::new(),
            sep4d: OnceCell::new(),
            harmonic: OnceCell::new(),
        },
    };
    let wanted = |k: u32| (cfg.verify.criteria.is_empty() || cfg.verify.criteria.contains(&k)) && (k != 9 || cfg.verify.slow);
    type Criterion<'s> = (u32, &'static str, fn(&Suite<'s>) -> Result<Vec<ReportRow>, HarnessError>);
    let all: [Criterion; 11] = [
        (1, "c1_reeb_counts", Suite::c1),
        (2, "c2_energy", Suite::c2),
        (3, "c3_ergodic", Suite::c3),
        (4, "c4a_branch_symmetric", Suite::c4a),
        (4, "c4b_branch_sep4d", Suite::c4b),
        (5, "c5_exit_trend", Suite::c5),
        (6, "c6_exit_time", Suite::c6),
        (7, "c7_log_asymptotics", Suite::c7),
        (8, "c8_volume_law", Suite::c8),
        (9, "c9_observable", Suite::c9),
        (10, "c10_determinism", Suite::c10),
    ];
    let mut rep = Report::default();
    for (k, id, f) in all {
        if !wanted(k) {
            continue;
        }
        let t0 = Instant::now();
        let built = suite.sc.build_seconds.get();
        match f(&suite) {
            Ok(rows) => rep.extend(rows),
            Err(e) => rep.push(ReportRow::error(id, &e.to_string())),
        }
        let setup = suite.sc.build_seconds.get() - built;
        rep.stamp(id, t0.elapsed().as_secs_f64() - setup);
    }
    rep.setup_seconds = suite.sc.build_seconds.get();
    rep
}
