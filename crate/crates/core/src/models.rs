//! Perturbation models: drift fields `b`, `beta` and the diffusion matrix `a2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

type VecFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A vector field with its divergence.
#[derive(Clone)]
pub struct VectorFieldModel {
    pub name: String,
    eval: Arc<VecFn>,
    divergence: Arc<ScalarFn>,
    zero: bool,
}

impl fmt::Debug for VectorFieldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorFieldModel({})", self.name)
    }
}

impl VectorFieldModel {
    pub fn new<E, D>(name: impl Into<String>, eval: E, divergence: D) -> Self
    where
        E: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            divergence: Arc::new(divergence),
            zero: false,
        }
    }

    pub fn zero() -> Self {
        let mut m = Self::new("zero", |_, out| out.iter_mut().for_each(|v| *v = 0.0), |_| 0.0);
        m.zero = true;
        m
    }

    /// `b = (-lambda p, 0)` for `x = (p, q)` with `p_dim` momenta.
    /// `div b = -lambda * p_dim`.
    pub fn momentum_damping(lambda: f64, p_dim: usize) -> Self {
        Self::new(
            format!("momentum_damping({lambda})"),
            move |x, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = if i < p_dim { -lambda * x[i] } else { 0.0 };
                }
            },
            move |_| -lambda * p_dim as f64,
        )
    }

    /// `b = -lambda x`.
    pub fn linear(lambda: f64, dim: usize) -> Self {
        Self::new(
            format!("linear({lambda})"),
            move |x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -lambda * v;
                }
            },
            move |_| -lambda * dim as f64,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    #[inline]
    pub fn divergence(&self, x: &[f64]) -> f64 {
        (self.divergence)(x)
    }
}

/// Constant symmetric positive definite diffusion matrix `a2` with a factor
/// `sigma2` such that `sigma2 sigma2^T = a2`.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub name: String,
    dim: usize,
    a: Vec<f64>,
    sigma: Vec<f64>,
    identity: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("diffusion matrix is not positive definite")]
pub struct NotPositiveDefinite;

impl DiffusionModel {
    pub fn identity(dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self {
            name: "identity".into(),
            dim,
            sigma: a.clone(),
            a,
            identity: true,
        }
    }

    pub fn constant(a_row_major: Vec<f64>, dim: usize) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a_row_major.len(), dim * dim);
        let m = DMatrix::from_row_slice(dim, dim, &a_row_major);
        let sym = (&m - m.transpose()).abs().max();
        if sym > 1e-12 * m.abs().max() {
            return Err(NotPositiveDefinite);
        }
        let chol = m.cholesky().ok_or(NotPositiveDefinite)?;
        let l = chol.l();
        let sigma = (0..dim * dim).map(|k| l[(k / dim, k % dim)]).collect();
        Ok(Self {
            name: "constant".into(),
            dim,
            a: a_row_major,
            sigma,
            identity: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    /// `out = sigma2 * xi`
    #[inline]
    pub fn apply_sigma(&self, xi: &[f64], out: &mut [f64]) {
        if self.identity {
            out.copy_from_slice(xi);
            return;
        }
        let d = self.dim;
        for i in 0..d {
            out[i] = (0..=i).map(|j| self.sigma[i * d + j] * xi[j]).sum();
        }
    }

    /// `a2 : Hess H`, the divergence of `a2 grad H` for constant `a2`.
    #[inline]
    pub fn div_a_grad(&self, hessian: &[f64]) -> f64 {
        let d = self.dim;
        if self.identity {
            return (0..d).map(|i| hessian[i * d + i]).sum();
        }
        self.a.iter().zip(hessian).map(|(a, h)| a * h).sum()
    }

    /// Column divergences of `a2` (`beta~`); zero for constant matrices.
    pub fn column_divergence(&self, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `(a2 g) . g`
    pub fn quad(&self, g: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += g[i] * self.a[i * d + j] * g[j];
            }
        }
        s
    }
}
