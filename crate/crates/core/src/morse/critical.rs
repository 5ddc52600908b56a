use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::field::ScalarFieldModel;
use super::MorseError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub value: f64,
    /// Number of negative Hessian eigenvalues.
    pub index: usize,
    pub eigenvalues: Vec<f64>,
}

impl CriticalPoint {
    pub fn is_minimum(&self) -> bool {
        self.index == 0
    }

    pub fn is_maximum(&self) -> bool {
        self.index == self.eigenvalues.len()
    }

    /// Builds the record for a point already known to be critical.
    pub fn classify(field: &ScalarFieldModel, location: Vec<f64>, degenerate_tol: f64) -> Result<Self, MorseError> {
        let d = field.dim();
        let hess = DMatrix::from_row_slice(d, d, &field.hessian_vec(&location));
        let mut eigenvalues: Vec<f64> = SymmetricEigen::new(hess).eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let min_abs = eigenvalues.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
        if min_abs < degenerate_tol {
            return Err(MorseError::DegenerateCritical {
                location,
                min_abs_eigenvalue: min_abs,
            });
        }
        Ok(Self {
            value: field.value(&location),
            index: eigenvalues.iter().filter(|e| **e < 0.0).count(),
            eigenvalues,
            location,
        })
    }
}

/// Result of a seeded Newton search. Seeds whose Newton run did not settle
/// are listed; they are harmless when another seed found the same basin.
#[derive(Debug, Clone)]
pub struct CriticalSearch {
    pub points: Vec<CriticalPoint>,
    pub unconverged_seeds: Vec<Vec<f64>>,
}

const MAX_NEWTON: usize = 200;
const POLISH: usize = 30;

/// Newton refinement from a regular grid of seeds in the field's box.
pub fn find_critical_points(
    field: &ScalarFieldModel,
    seeds_per_axis: usize,
    newton_tol: f64,
    degenerate_tol: f64,
) -> Result<CriticalSearch, MorseError> {
    assert!(seeds_per_axis >= 8, "seeds_per_axis must be at least 8");
    let d = field.dim();
    let b = &field.bounds;
    let total = seeds_per_axis.pow(d as u32);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut unconverged = Vec::new();
    let merge_radius = 1e-6 * b.lo.iter().zip(&b.hi).map(|(l, h)| h - l).fold(0.0, f64::max);

    for k in 0..total {
        let mut rem = k;
        let seed: Vec<f64> = (0..d)
            .map(|j| {
                let i = rem % seeds_per_axis;
                rem /= seeds_per_axis;
                b.lo[j] + (b.hi[j] - b.lo[j]) * (i as f64 + 0.5) / seeds_per_axis as f64
            })
            .collect();
        match newton(field, &seed, newton_tol) {
            Some(x) => {
                if !found.iter().any(|y| dist(y, &x) < merge_radius) {
                    found.push(x);
                }
            }
            None => unconverged.push(seed),
        }
    }

    let mut points = Vec::with_capacity(found.len());
    for x in found {
        if b.relative_margin(&x) <= 0.0 {
            return Err(MorseError::CriticalOnBoundary { location: x });
        }
        points.push(CriticalPoint::classify(field, x, degenerate_tol)?);
    }
    points.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.location.partial_cmp(&b.location).unwrap()));
    Ok(CriticalSearch {
        points,
        unconverged_seeds: unconverged,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn grad_norm(field: &ScalarFieldModel, x: &[f64], g: &mut [f64]) -> f64 {
    field.gradient(x, g);
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Newton on grad H = 0, then a few polishing steps so that slowly
/// converging (degenerate) points drift close enough to expose a vanishing
/// eigenvalue.
fn newton(field: &ScalarFieldModel, seed: &[f64], tol: f64) -> Option<Vec<f64>> {
    let d = field.dim();
    let b = &field.bounds;
    let mut x = seed.to_vec();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut trial = vec![0.0; d];
    let mut gn = grad_norm(field, &x, &mut g);
    let mut converged_at = None;

    for it in 0..MAX_NEWTON {
        if gn <= tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        if let Some(c) = converged_at {
            if it >= c + POLISH || gn == 0.0 {
                break;
            }
        }
        field.hessian(&x, &mut h);
        let hm = DMatrix::from_row_slice(d, d, &h);
        let rhs = DVector::from_column_slice(&g);
        let step = match hm.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => hm.svd(true, true).solve(&rhs, 1e-14).ok()?,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..d {
                trial[i] = x[i] - t * step[i];
            }
            if b.contains(&trial) {
                let tn = grad_norm(field, &trial, &mut g);
                if tn < gn || (converged_at.is_some() && tn <= gn) {
                    x.copy_from_slice(&trial);
                    gn = tn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            field.gradient(&x, &mut g);
            break;
        }
    }
    if gn <= tol || converged_at.is_some() {
        Some(x)
    } else {
        None
    }
}
