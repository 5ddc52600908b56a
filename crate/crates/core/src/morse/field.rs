use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::MorseError;

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VecFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box corners differ in dimension");
        assert!(lo.iter().zip(&hi).all(|(a, b)| a < b), "empty box");
        Self { lo, hi }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Distance from `x` to the nearest face, in units of the side length.
    pub fn relative_margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| ((v - a).min(b - v)) / (b - a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Kinetic part of a separable Hamiltonian `H(p, q) = h(p) + F(q)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kinetic {
    /// `|p|^2 / 2`
    Standard,
    /// `sum p_i^2 / (2 m_i)`
    Masses(Vec<f64>),
}

/// Structure tag for `H(p, q) = h(p) + F(q)` with `x = (p, q)`.
#[derive(Clone)]
pub struct Separable {
    pub p_dim: usize,
    pub kinetic: Kinetic,
    pub potential: Arc<ScalarFieldModel>,
}

impl fmt::Debug for Separable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Separable")
            .field("p_dim", &self.p_dim)
            .field("kinetic", &self.kinetic)
            .field("potential", &self.potential.name)
            .finish()
    }
}

/// A smooth scalar field given by analytic closures for the value, gradient
/// and Hessian (row-major, `dim * dim`).
#[derive(Clone)]
pub struct ScalarFieldModel {
    pub name: String,
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<VecFn>,
    hessian: Arc<VecFn>,
    pub bounds: BoundingBox,
    separable: Option<Separable>,
}

impl fmt::Debug for ScalarFieldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFieldModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .field("separable", &self.separable)
            .finish()
    }
}

impl ScalarFieldModel {
    pub fn new<V, G, Hs>(name: impl Into<String>, bounds: BoundingBox, value: V, gradient: G, hessian: Hs) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        Hs: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim: bounds.dim(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            bounds,
            separable: None,
        }
    }

    /// Builds `H(p, q) = h(p) + F(q)` on `[-p_half, p_half]^p_dim x box(F)`.
    pub fn separable(name: impl Into<String>, p_dim: usize, p_half: f64, kinetic: Kinetic, potential: ScalarFieldModel) -> Self {
        let q_dim = potential.dim();
        let dim = p_dim + q_dim;
        let mut lo = vec![-p_half; p_dim];
        let mut hi = vec![p_half; p_dim];
        lo.extend_from_slice(&potential.bounds.lo);
        hi.extend_from_slice(&potential.bounds.hi);
        let potential = Arc::new(potential);
        let masses: Vec<f64> = match &kinetic {
            Kinetic::Standard => vec![1.0; p_dim],
            Kinetic::Masses(m) => {
                assert_eq!(m.len(), p_dim, "one mass per momentum");
                m.clone()
            }
        };

        let (pv, mv) = (potential.clone(), masses.clone());
        let value = move |x: &[f64]| {
            let kin: f64 = x[..p_dim].iter().zip(&mv).map(|(p, m)| 0.5 * p * p / m).sum();
            kin + pv.value(&x[p_dim..])
        };
        let (pg, mg) = (potential.clone(), masses.clone());
        let gradient = move |x: &[f64], out: &mut [f64]| {
            for i in 0..p_dim {
                out[i] = x[i] / mg[i];
            }
            pg.gradient(&x[p_dim..], &mut out[p_dim..]);
        };
        let (ph, mh) = (potential.clone(), masses);
        let hessian = move |x: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..p_dim {
                out[i * dim + i] = 1.0 / mh[i];
            }
            let mut hq = [0.0; 64];
            let hq = &mut hq[..q_dim * q_dim];
            ph.hessian(&x[p_dim..], hq);
            for i in 0..q_dim {
                for j in 0..q_dim {
                    out[(p_dim + i) * dim + p_dim + j] = hq[i * q_dim + j];
                }
            }
        };
        let mut model = Self::new(name, BoundingBox::new(lo, hi), value, gradient, hessian);
        model.separable = Some(Separable { p_dim, kinetic, potential });
        model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn separable_parts(&self) -> Option<&Separable> {
        self.separable.as_ref()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    #[inline]
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        (self.hessian)(x, out)
    }

    pub fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient(x, &mut g);
        g
    }

    pub fn hessian_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim * self.dim];
        self.hessian(x, &mut h);
        h
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let h = self.hessian_vec(x);
        (0..self.dim).map(|i| h[i * self.dim + i]).sum()
    }

    /// Smallest value of the field over the faces of the bounding box,
    /// sampled on a grid with `per_axis` points along each face direction.
    pub fn boundary_min(&self, per_axis: usize) -> f64 {
        let d = self.dim;
        let b = &self.bounds;
        let mut best = f64::INFINITY;
        let face_pts = per_axis.pow((d - 1) as u32);
        let mut x = vec![0.0; d];
        for axis in 0..d {
            for side in [b.lo[axis], b.hi[axis]] {
                for k in 0..face_pts {
                    let mut rem = k;
                    for (j, xj) in x.iter_mut().enumerate() {
                        if j == axis {
                            *xj = side;
                            continue;
                        }
                        let idx = rem % per_axis;
                        rem /= per_axis;
                        *xj = b.lo[j] + (b.hi[j] - b.lo[j]) * idx as f64 / (per_axis - 1) as f64;
                    }
                    best = best.min(self.value(&x));
                }
            }
        }
        best
    }
}

/// `J grad H` for `x = (p, q)`: `(-dH/dq, dH/dp)`.
pub fn symplectic_gradient(field: &ScalarFieldModel, x: &[f64]) -> Result<Vec<f64>, MorseError> {
    let d = field.dim();
    if d % 2 != 0 {
        return Err(MorseError::OddDimension { dim: d });
    }
    if x.len() != d {
        return Err(MorseError::DimensionMismatch { expected: d, got: x.len() });
    }
    let g = field.gradient_vec(x);
    let mut out = vec![0.0; d];
    apply_symplectic(&g, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn apply_symplectic(g: &[f64], out: &mut [f64]) {
    let n = g.len() / 2;
    for i in 0..n {
        out[i] = -g[n + i];
        out[n + i] = g[i];
    }
}
