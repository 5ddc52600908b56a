//! Regular vertex lattice over a bounding box with Freudenthal neighbours.

use crate::morse::BoundingBox;

#[derive(Debug, Clone)]
pub struct Lattice {
    /// Vertices per axis (cells + 1).
    pub shape: Vec<usize>,
    pub lo: Vec<f64>,
    pub step: Vec<f64>,
    strides: Vec<usize>,
    /// Neighbour offsets `(per-axis delta, linear offset)`.
    offsets: Vec<(Vec<i8>, isize)>,
}

impl Lattice {
    pub fn new(bounds: &BoundingBox, cells: &[usize]) -> Self {
        let d = bounds.dim();
        assert_eq!(cells.len(), d);
        let shape: Vec<usize> = cells.iter().map(|c| c + 1).collect();
        let step: Vec<f64> = (0..d).map(|a| (bounds.hi[a] - bounds.lo[a]) / cells[a] as f64).collect();
        let mut strides = vec![1usize; d];
        for a in 1..d {
            strides[a] = strides[a - 1] * shape[a - 1];
        }
        let mut offsets = Vec::new();
        for mask in 1u32..(1 << d) {
            for sign in [1i8, -1] {
                let delta: Vec<i8> = (0..d).map(|a| if mask & (1 << a) != 0 { sign } else { 0 }).collect();
                let lin: isize = (0..d).map(|a| delta[a] as isize * strides[a] as isize).sum();
                offsets.push((delta, lin));
            }
        }
        Self {
            shape,
            lo: bounds.lo.clone(),
            step,
            strides,
            offsets,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords(&self, mut idx: usize, out: &mut [usize]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = idx % self.shape[a];
            idx /= self.shape[a];
        }
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    pub fn position(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in 0..self.dim() {
            let c = rem % self.shape[a];
            rem /= self.shape[a];
            out[a] = self.lo[a] + self.step[a] * c as f64;
        }
    }

    /// Calls `f` for every Freudenthal neighbour of vertex `idx`.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, coords: &mut [usize], mut f: impl FnMut(usize)) {
        self.coords(idx, coords);
        'off: for (delta, lin) in &self.offsets {
            for (a, &dl) in delta.iter().enumerate() {
                if (dl < 0 && coords[a] == 0) || (dl > 0 && coords[a] + 1 == self.shape[a]) {
                    continue 'off;
                }
            }
            f((idx as isize + lin) as usize);
        }
    }

    /// Lower corner of the cell containing `x` (clamped) and the corner indices.
    pub fn cell_corners(&self, x: &[f64], out: &mut Vec<usize>) {
        let d = self.dim();
        let mut base = 0usize;
        for a in 0..d {
            let t = ((x[a] - self.lo[a]) / self.step[a]).floor();
            let c = (t.max(0.0) as usize).min(self.shape[a] - 2);
            base += c * self.strides[a];
        }
        out.clear();
        for mask in 0..(1usize << d) {
            let mut idx = base;
            for a in 0..d {
                if mask & (1 << a) != 0 {
                    idx += self.strides[a];
                }
            }
            out.push(idx);
        }
    }

    /// Nearest lattice vertex to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for a in 0..self.dim() {
            let t = ((x[a] - self.lo[a]) / self.step[a]).round();
            let c = (t.max(0.0) as usize).min(self.shape[a] - 1);
            idx += c * self.strides[a];
        }
        idx
    }
}
