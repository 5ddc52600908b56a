//! Reference values computed without the graph or the coefficient tables.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use reebsim::rng::{substream, StreamTag};

/// `F(q1, q2) = (q1^2 - 1)^2 + 5 q2^2 + c q1`.
fn well_potential(c: f64, q1: f64, q2: f64) -> f64 {
    let a = q1 * q1 - 1.0;
    a * a + 5.0 * q2 * q2 + c * q1
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WellVolumes {
    /// Saddle position and level.
    pub q1_saddle: f64,
    pub z_saddle: f64,
    /// `{H < z_saddle}` split at `q1 = q1_saddle`.
    pub left: f64,
    pub right: f64,
    /// `left / (left + right)` and its standard error.
    pub left_fraction: f64,
    pub fraction_se: f64,
    pub samples: usize,
}

const CHUNK: usize = 100_000;

/// Volumes of the two wells of `|p|^2/2 + F(q)` below the saddle level by
/// uniform sampling of a box in `(p1, p2, q1, q2)`.
pub fn sep4d_well_volumes(c: f64, samples: usize, seed: u64) -> WellVolumes {
    let dq1 = |q: f64| 4.0 * q * (q * q - 1.0) + c;
    let q1_saddle = bisect(-0.5, 0.5, dq1);
    let z = well_potential(c, q1_saddle, 0.0);
    let f_min = [bisect(-1.5, -0.6, dq1), bisect(0.6, 1.5, dq1)]
        .into_iter()
        .map(|q| well_potential(c, q, 0.0))
        .fold(f64::INFINITY, f64::min);
    let p_half = (2.0 * (z - f_min)).sqrt();
    let q2_half = ((z - f_min) / 5.0).sqrt();
    let q1_half = 1.7;
    let box_volume = (2.0 * p_half).powi(2) * 2.0 * q1_half * 2.0 * q2_half;

    let chunks = samples.div_ceil(CHUNK);
    let (nl, nr) = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, StreamTag::Oracle, k as u64);
            let n = CHUNK.min(samples - k * CHUNK);
            let (mut l, mut r) = (0usize, 0usize);
            for _ in 0..n {
                let p1 = p_half * (2.0 * rng.random::<f64>() - 1.0);
                let p2 = p_half * (2.0 * rng.random::<f64>() - 1.0);
                let q1 = q1_half * (2.0 * rng.random::<f64>() - 1.0);
                let q2 = q2_half * (2.0 * rng.random::<f64>() - 1.0);
                if 0.5 * (p1 * p1 + p2 * p2) + well_potential(c, q1, q2) < z {
                    if q1 < q1_saddle {
                        l += 1;
                    } else {
                        r += 1;
                    }
                }
            }
            (l, r)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let hits = (nl + nr) as f64;
    let frac = nl as f64 / hits;
    WellVolumes {
        q1_saddle,
        z_saddle: z,
        left: box_volume * nl as f64 / n,
        right: box_volume * nr as f64 / n,
        left_fraction: frac,
        fraction_se: (frac * (1.0 - frac) / hits).sqrt(),
        samples,
    }
}

/// Average of `g(q)` over the left-well orbit `p^2/2 + q^4/4 - q^2/2 = z`,
/// `-1/4 < z < 0`, with the `1/|grad H|` density: `int g/|p| dq / int 1/|p| dq`.
pub fn doublewell_orbit_average(z: f64, g: impl Fn(f64) -> f64) -> f64 {
    assert!(-0.25 < z && z < 0.0, "level {z} has no left-well orbit");
    let root = (1.0 + 4.0 * z).sqrt();
    let (a, b) = (-(1.0 + root).sqrt(), -(1.0 - root).sqrt());
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    // q = mid + half sin(theta) removes the endpoint singularities
    let n = 200_000;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..n {
        let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
        let q = mid + half * th.sin();
        let kinetic = 2.0 * (z - (0.25 * q.powi(4) - 0.5 * q * q));
        if kinetic <= 0.0 {
            continue;
        }
        let w = half * th.cos() / kinetic.sqrt();
        num += w * g(q);
        den += w;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_wells_split_evenly() {
        let v = sep4d_well_volumes(0.0, 400_000, 3);
        assert!(v.q1_saddle.abs() < 1e-12);
        assert!((v.z_saddle - 1.0).abs() < 1e-12);
        assert!((v.left_fraction - 0.5).abs() < 4.0 * v.fraction_se, "{v:?}");
    }

    #[test]
    fn orbit_average_of_constant_is_one() {
        assert!((doublewell_orbit_average(-0.05, |_| 1.0) - 1.0).abs() < 1e-12);
        // deep in the well the orbit is nearly harmonic around q = -1
        let q = doublewell_orbit_average(-0.2499, |q| q);
        assert!((q + 1.0).abs() < 1e-3, "{q}");
    }
}
