use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::critical::CriticalPoint;
use super::field::ScalarFieldModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionStatus {
    Pass,
    Fail,
}

impl From<bool> for AssumptionStatus {
    fn from(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelPair {
    pub first: usize,
    pub second: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Pairs of critical points whose values are closer than `level_sep_tol`.
    pub close_levels: Vec<LevelPair>,
    pub level_separation: AssumptionStatus,
    /// Growth constants: `H >= c1 |x|^2`, `|grad H| >= c2 |x|`, `|lap H| >= c3`
    /// as minima over probes on the box boundary.
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub growth: AssumptionStatus,
    /// Largest Hessian eigenvalue over all critical points.
    pub lambda_star: f64,
    /// Bound on the eigenvalues of `a1 = |grad H|^2 (I - n n^T)` near the critical points.
    pub k_bound: f64,
    /// `kappa` must stay below this value.
    pub kappa_max: f64,
}

impl AssumptionReport {
    pub fn kappa_admissible(&self, kappa: f64) -> bool {
        kappa < self.kappa_max
    }
}

pub const LEVEL_SEP_TOL: f64 = 1e-8;
/// Radius of the balls around critical points where `K` is measured.
pub const K_RADIUS: f64 = 0.1;

pub fn check_assumptions(field: &ScalarFieldModel, criticals: &[CriticalPoint]) -> AssumptionReport {
    assert!(!criticals.is_empty(), "no critical points");
    let d = field.dim();

    let mut close_levels = Vec::new();
    for i in 0..criticals.len() {
        for j in i + 1..criticals.len() {
            let gap = (criticals[i].value - criticals[j].value).abs();
            if gap <= LEVEL_SEP_TOL {
                close_levels.push(LevelPair { first: i, second: j, gap });
            }
        }
    }

    // Boundary probes: face grid points plus random points on each face.
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a1);
    let b = &field.bounds;
    let (mut c1, mut c2, mut c3) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; d];
    for axis in 0..d {
        for side in [b.lo[axis], b.hi[axis]] {
            for _ in 0..400 {
                for j in 0..d {
                    x[j] = if j == axis { side } else { rng.random_range(b.lo[j]..=b.hi[j]) };
                }
                let r2: f64 = x.iter().map(|v| v * v).sum();
                field.gradient(&x, &mut g);
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                c1 = c1.min(field.value(&x) / r2);
                c2 = c2.min(gn / r2.sqrt());
                c3 = c3.min(field.laplacian(&x).abs());
            }
        }
    }

    let mut lambda_star = f64::NEG_INFINITY;
    let mut k_bound: f64 = 0.0;
    for cp in criticals {
        let hm = DMatrix::from_row_slice(d, d, &field.hessian_vec(&cp.location));
        let eig = SymmetricEigen::new(hm);
        lambda_star = lambda_star.max(eig.eigenvalues.max());
        for _ in 0..2000 {
            // uniform in the ball of radius K_RADIUS
            let mut n2 = 0.0;
            for v in x.iter_mut() {
                *v = rng.sample::<f64, _>(rand_distr::StandardNormal);
                n2 += *v * *v;
            }
            let r = K_RADIUS * rng.random::<f64>().powf(1.0 / d as f64) / n2.sqrt();
            for (v, c) in x.iter_mut().zip(&cp.location) {
                *v = c + *v * r;
            }
            field.gradient(&x, &mut g);
            k_bound = k_bound.max(g.iter().map(|v| v * v).sum());
        }
    }
    let kappa_max = if k_bound > 0.0 && lambda_star > 0.0 {
        1.0 / (k_bound * lambda_star)
    } else {
        f64::INFINITY
    };

    AssumptionReport {
        level_separation: close_levels.is_empty().into(),
        close_levels,
        growth: (c1 > 0.0 && c2 > 0.0 && c3 > 0.0).into(),
        c1,
        c2,
        c3,
        lambda_star,
        k_bound,
        kappa_max,
    }
}
