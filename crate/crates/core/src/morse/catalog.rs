//! Built-in fields addressable by name.

use super::field::{BoundingBox, Kinetic, ScalarFieldModel};

/// `|x|^2 / 2` on `[-3, 3]^dim`.
pub fn harmonic(dim: usize) -> ScalarFieldModel {
    ScalarFieldModel::new(
        format!("harmonic{dim}"),
        BoundingBox::cube(dim, 3.0),
        |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
        |x, g| g.copy_from_slice(x),
        move |x, h| {
            let d = x.len();
            h.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..d {
                h[i * d + i] = 1.0;
            }
        },
    )
}

/// `F1(q) = q^4/4 - q^2/2 + c q` on `[-2, 2]`.
pub fn doublewell_potential(c: f64) -> ScalarFieldModel {
    ScalarFieldModel::new(
        format!("F1(c={c})"),
        BoundingBox::new(vec![-2.0], vec![2.0]),
        move |x| {
            let q = x[0];
            0.25 * q.powi(4) - 0.5 * q * q + c * q
        },
        move |x, g| {
            let q = x[0];
            g[0] = q.powi(3) - q + c;
        },
        |x, h| h[0] = 3.0 * x[0] * x[0] - 1.0,
    )
}

/// One degree of freedom: `H = p^2/2 + F1(q) + c q`, `x = (p, q)`.
pub fn doublewell1d_tilted(c: f64) -> ScalarFieldModel {
    let mut f = ScalarFieldModel::separable("doublewell1d", 1, 2.0, Kinetic::Standard, doublewell_potential(c));
    if c != 0.0 {
        f.name = format!("doublewell1d_tilted(c={c})");
    }
    f
}

pub fn doublewell1d() -> ScalarFieldModel {
    doublewell1d_tilted(0.0)
}

/// `F(q1, q2) = (q1^2 - 1)^2 + 5 q2^2 + c q1` on `[-1.8, 1.8] x [-1.2, 1.2]`.
pub fn doublewell2d(c: f64) -> ScalarFieldModel {
    ScalarFieldModel::new(
        format!("doublewell2d(c={c})"),
        BoundingBox::new(vec![-1.8, -1.2], vec![1.8, 1.2]),
        move |x| {
            let a = x[0] * x[0] - 1.0;
            a * a + 5.0 * x[1] * x[1] + c * x[0]
        },
        move |x, g| {
            g[0] = 4.0 * x[0] * (x[0] * x[0] - 1.0) + c;
            g[1] = 10.0 * x[1];
        },
        |x, h| {
            h[0] = 12.0 * x[0] * x[0] - 4.0;
            h[1] = 0.0;
            h[2] = 0.0;
            h[3] = 10.0;
        },
    )
}

/// `H = |p|^2/2 + doublewell2d(c)`, `x = (p1, p2, q1, q2)`.
pub fn sep4d(c: f64) -> ScalarFieldModel {
    ScalarFieldModel::separable(format!("sep4d(c={c})"), 2, 2.6, Kinetic::Standard, doublewell2d(c))
}

/// A 1-D field with a degenerate minimum, `q^4` on `[-1, 1]`.
pub fn quartic() -> ScalarFieldModel {
    ScalarFieldModel::new(
        "quartic",
        BoundingBox::new(vec![-1.0], vec![1.0]),
        |x| x[0].powi(4),
        |x, g| g[0] = 4.0 * x[0].powi(3),
        |x, h| h[0] = 12.0 * x[0] * x[0],
    )
}

/// Looks up a catalog entry. `c` is the tilt for the parameterised fields.
pub fn by_name(name: &str, c: f64, dim: Option<usize>) -> Option<ScalarFieldModel> {
    Some(match name {
        "harmonic" => harmonic(dim.unwrap_or(2)),
        "doublewell1d" => doublewell1d(),
        "doublewell1d_tilted" => doublewell1d_tilted(c),
        "doublewell2d" => doublewell2d(c),
        "sep4d" => sep4d(c),
        _ => return None,
    })
}

pub const NAMES: &[&str] = &["harmonic", "doublewell1d", "doublewell1d_tilted", "doublewell2d", "sep4d"];
