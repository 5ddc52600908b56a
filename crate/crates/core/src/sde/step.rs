use rand::Rng;
use rand_distr::StandardNormal;

use super::{SdeConfig, SdeError};
use crate::coeffs::PerturbationModels;
use crate::morse::{Kinetic, ScalarFieldModel};

const MAX_REDRAWS: usize = 200;

/// Strang splitting: fast half-step, stochastic step, fast half-step.
pub(crate) struct Stepper<'a> {
    field: &'a ScalarFieldModel,
    models: &'a PerturbationModels,
    eps: f64,
    kappa: f64,
    delta: f64,
    dt: f64,
    z_max: f64,
    energy_tol: f64,
    /// `(p_dim, 1/m_i, potential)` for leapfrog.
    leapfrog: Option<(usize, Vec<f64>, &'a ScalarFieldModel)>,
    g: Vec<f64>,
    hess: Vec<f64>,
    xi: Vec<f64>,
    tmp: Vec<f64>,
    y: Vec<f64>,
    x_start: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(config: &'a SdeConfig, z_max: f64) -> Self {
        let field = &config.field;
        let d = field.dim();
        let leapfrog = field.separable_parts().map(|s| {
            let inv = match &s.kinetic {
                Kinetic::Standard => vec![1.0; s.p_dim],
                Kinetic::Masses(m) => m.iter().map(|m| 1.0 / m).collect(),
            };
            (s.p_dim, inv, s.potential.as_ref())
        });
        Self {
            field,
            models: &config.models,
            eps: config.epsilon,
            kappa: config.kappa,
            delta: config.delta,
            dt: config.dt,
            z_max,
            energy_tol: config.energy_tol,
            leapfrog,
            g: vec![0.0; d],
            hess: vec![0.0; d * d],
            xi: vec![0.0; d],
            tmp: vec![0.0; d],
            y: vec![0.0; d],
            x_start: vec![0.0; d],
        }
    }

    pub(crate) fn step(&mut self, x: &mut [f64], rng: &mut impl Rng, t: f64) -> Result<(), SdeError> {
        self.fast_half(x, t)?;
        self.stochastic(x, rng, t)?;
        self.fast_half(x, t)
    }

    /// Flow of `(1/eps) J grad H` over `dt/2`.
    fn fast_half(&mut self, x: &mut [f64], t: f64) -> Result<(), SdeError> {
        let tau = 0.5 * self.dt / self.eps;
        let h0 = self.field.value(x);
        match &self.leapfrog {
            Some((p_dim, inv_m, pot)) => {
                let p_dim = *p_dim;
                let (p, q) = x.split_at_mut(p_dim);
                let gq = &mut self.g[..q.len()];
                pot.gradient(q, gq);
                for i in 0..p_dim {
                    p[i] -= 0.5 * tau * gq[i];
                }
                for i in 0..q.len() {
                    q[i] += tau * p[i] * inv_m[i];
                }
                pot.gradient(q, gq);
                for i in 0..p_dim {
                    p[i] -= 0.5 * tau * gq[i];
                }
            }
            None => self.implicit_midpoint(x, tau, t)?,
        }
        let drift = (self.field.value(x) - h0).abs();
        if drift > self.energy_tol * h0.abs().max(1.0) {
            return Err(SdeError::StepTooLarge { t, drift });
        }
        Ok(())
    }

    fn implicit_midpoint(&mut self, x: &mut [f64], tau: f64, t: f64) -> Result<(), SdeError> {
        let d = x.len();
        let n = d / 2;
        self.x_start.copy_from_slice(x);
        for _ in 0..100 {
            for i in 0..d {
                self.y[i] = 0.5 * (self.x_start[i] + x[i]);
            }
            self.field.gradient(&self.y, &mut self.g);
            let mut change: f64 = 0.0;
            for i in 0..n {
                let np = self.x_start[i] - tau * self.g[n + i];
                let nq = self.x_start[n + i] + tau * self.g[i];
                change = change.max((np - x[i]).abs()).max((nq - x[n + i]).abs());
                x[i] = np;
                x[n + i] = nq;
            }
            if change <= 1e-15 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                return Ok(());
            }
        }
        Err(SdeError::StepTooLarge { t, drift: f64::NAN })
    }

    /// Noise and slow drifts over a full `dt`; steps that would leave the box
    /// or pass the ceiling are redrawn.
    fn stochastic(&mut self, x: &mut [f64], rng: &mut impl Rng, t: f64) -> Result<(), SdeError> {
        let d = x.len();
        self.x_start.copy_from_slice(x);
        for _ in 0..MAX_REDRAWS {
            x.copy_from_slice(&self.x_start);
            if self.kappa > 0.0 {
                self.kappa_step(x, rng);
            }
            self.slow_step(x, rng);
            if self.field.bounds.contains(x) && self.field.value(x) <= self.z_max {
                return Ok(());
            }
        }
        x.copy_from_slice(&self.x_start);
        let _ = d;
        Err(SdeError::BoxExit { t })
    }

    /// `sqrt(kappa/eps) sigma1 dW + (kappa/2eps) b_tilde dt`, then projected
    /// back onto the starting level along `grad H`.
    fn kappa_step(&mut self, x: &mut [f64], rng: &mut impl Rng) {
        let d = x.len();
        let h0 = self.field.value(x);
        self.field.gradient(x, &mut self.g);
        self.field.hessian(x, &mut self.hess);
        let g2: f64 = self.g.iter().map(|v| v * v).sum();
        if g2 == 0.0 {
            return;
        }
        let norm = g2.sqrt();
        let lap: f64 = (0..d).map(|i| self.hess[i * d + i]).sum();
        let sq = self.dt.sqrt();
        for v in self.xi.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal) * sq;
        }
        let gxi: f64 = self.g.iter().zip(&self.xi).map(|(a, b)| a * b).sum();
        let amp = (self.kappa / self.eps).sqrt();
        let c = 0.5 * self.kappa / self.eps * self.dt;
        for i in 0..d {
            let hg: f64 = (0..d).map(|j| self.hess[i * d + j] * self.g[j]).sum();
            let b_tilde = hg - self.g[i] * lap;
            let noise = norm * self.xi[i] - self.g[i] * gxi / norm;
            self.tmp[i] = x[i] + c * b_tilde + amp * noise;
        }
        x.copy_from_slice(&self.tmp);
        for _ in 0..6 {
            let h = self.field.value(x);
            let err = h - h0;
            if err.abs() <= 1e-14 * h0.abs().max(1.0) {
                break;
            }
            self.field.gradient(x, &mut self.g);
            let g2: f64 = self.g.iter().map(|v| v * v).sum();
            if g2 < 1e-300 {
                break;
            }
            for i in 0..d {
                x[i] -= err / g2 * self.g[i];
            }
        }
    }

    /// `(b + delta beta + delta/2 beta_tilde) dt + sqrt(delta) sigma2 dW`.
    fn slow_step(&mut self, x: &mut [f64], rng: &mut impl Rng) {
        let d = x.len();
        let m = self.models;
        let b_zero = m.b.is_zero();
        let beta_zero = m.beta.is_zero() || self.delta == 0.0;
        if b_zero && beta_zero && self.delta == 0.0 {
            return;
        }
        self.y.copy_from_slice(x);
        if !b_zero {
            m.b.eval(&self.y, &mut self.tmp);
            for i in 0..d {
                x[i] += self.tmp[i] * self.dt;
            }
        }
        if !beta_zero {
            m.beta.eval(&self.y, &mut self.tmp);
            for i in 0..d {
                x[i] += self.delta * self.tmp[i] * self.dt;
            }
        }
        if self.delta > 0.0 {
            m.a2.column_divergence(&self.y, &mut self.tmp);
            for i in 0..d {
                x[i] += 0.5 * self.delta * self.tmp[i] * self.dt;
            }
            let sq = (self.delta * self.dt).sqrt();
            for v in self.xi.iter_mut() {
                *v = rng.sample::<f64, _>(StandardNormal);
            }
            m.a2.apply_sigma(&self.xi, &mut self.tmp);
            for i in 0..d {
                x[i] += sq * self.tmp[i];
            }
        }
    }
}
