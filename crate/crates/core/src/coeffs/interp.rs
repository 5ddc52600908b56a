//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch-Butland
//! slopes), used so that `v = V'` is the exact derivative of the `V` curve.

#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "need at least two nodes");
        assert!(x.windows(2).all(|w| w[0] < w[1]), "nodes must increase");
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Self { x, y, d };
        }
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Self { x, y, d }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn segment(&self, t: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.x.len() - 2),
        }
    }

    /// Value at `t`, clamped to the node range.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(self.x[0], self.x[self.x.len() - 1]);
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.d[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1]
    }

    /// Derivative at `t`, clamped to the node range.
    pub fn deriv(&self, t: f64) -> f64 {
        let t = t.clamp(self.x[0], self.x[self.x.len() - 1]);
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * self.y[k]
            + (3.0 * s2 - 4.0 * s + 1.0) * h * self.d[k]
            + (-6.0 * s2 + 6.0 * s) * self.y[k + 1]
            + (3.0 * s2 - 2.0 * s) * h * self.d[k + 1])
            / h
    }

    pub fn node_slopes(&self) -> &[f64] {
        &self.d
    }
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}
