use super::contour::NONE;
use super::lattice::Lattice;
use super::{EdgeId, GraphPoint, Location, ReebGraph};

#[derive(Debug, Clone)]
pub(crate) struct NodeInfo {
    pub z: f64,
    pub up: Vec<usize>,
    pub down: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct ArcInfo {
    pub lo: usize,
    pub hi: Option<usize>,
}

/// Per-vertex arc labels of the sweep lattice plus the compressed tree they
/// refer to. In separable mode the lattice lives in `q`-space and `p_dim`
/// leading coordinates are skipped.
#[derive(Debug, Clone)]
pub(crate) struct Labels {
    pub lattice: Lattice,
    pub values: Vec<f64>,
    pub arc_of: Vec<u32>,
    pub nodes: Vec<NodeInfo>,
    pub arcs: Vec<ArcInfo>,
    /// `(z where the edge starts, edge)` in increasing order per arc
    pub arc_edges: Vec<Vec<(f64, EdgeId)>>,
    pub p_dim: usize,
}

impl Labels {
    pub fn new(lattice: Lattice, values: Vec<f64>, arc_of: Vec<u32>, nodes: Vec<NodeInfo>, arcs: Vec<ArcInfo>, p_dim: usize) -> Self {
        Self {
            lattice,
            values,
            arc_of,
            nodes,
            arcs,
            arc_edges: Vec::new(),
            p_dim,
        }
    }

    fn arc_range(&self, a: usize) -> (f64, f64) {
        let arc = &self.arcs[a];
        (self.nodes[arc.lo].z, arc.hi.map_or(f64::INFINITY, |h| self.nodes[h].z))
    }

    /// Arc whose preimage component at level `z` contains the label-space
    /// point `y`.
    pub fn locate_arc(&self, y: &[f64], z: f64) -> usize {
        let mut corners = Vec::with_capacity(1 << self.lattice.dim());
        self.lattice.cell_corners(y, &mut corners);
        let mut below: Option<(f64, usize)> = None;
        let mut above: Option<(f64, usize)> = None;
        for &c in &corners {
            let a = self.arc_of[c];
            if a == NONE {
                continue;
            }
            let v = self.values[c];
            if v <= z {
                if below.is_none_or(|(bv, _)| v > bv) {
                    below = Some((v, a as usize));
                }
            } else if above.is_none_or(|(av, _)| v < av) {
                above = Some((v, a as usize));
            }
        }
        let start = match (below, above) {
            (Some((_, a)), _) | (None, Some((_, a))) => a,
            (None, None) => {
                let n = self.lattice.nearest(y);
                self.nearest_labelled(n, y)
            }
        };
        self.walk(start, z, y)
    }

    fn walk(&self, mut a: usize, z: f64, y: &[f64]) -> usize {
        for _ in 0..=self.arcs.len() {
            let (lo, hi) = self.arc_range(a);
            if z >= lo && z <= hi {
                return a;
            }
            let cands: &[usize] = if z > hi {
                &self.nodes[self.arcs[a].hi.expect("finite arc top")].up
            } else {
                &self.nodes[self.arcs[a].lo].down
            };
            match cands.len() {
                0 => return a,
                1 => a = cands[0],
                _ => a = self.tie_break(cands, if z > hi { self.arcs[a].hi.unwrap() } else { self.arcs[a].lo }, y),
            }
        }
        a
    }

    fn nearest_labelled(&self, start: usize, y: &[f64]) -> usize {
        let d = self.lattice.dim();
        let mut pos = vec![0.0; d];
        let mut best = (f64::INFINITY, 0usize);
        let mut coords = vec![0; d];
        self.lattice.coords(start, &mut coords);
        for radius in 1..=8usize {
            let span = 2 * radius + 1;
            for k in 0..span.pow(d as u32) {
                let mut rem = k;
                let mut idx = Some(0usize);
                let mut c = vec![0usize; d];
                for a in 0..d {
                    let off = (rem % span) as isize - radius as isize;
                    rem /= span;
                    let v = coords[a] as isize + off;
                    if v < 0 || v >= self.lattice.shape[a] as isize {
                        idx = None;
                        break;
                    }
                    c[a] = v as usize;
                }
                if idx.is_none() {
                    continue;
                }
                let i = self.lattice.index(&c);
                if self.arc_of[i] == NONE {
                    continue;
                }
                self.lattice.position(i, &mut pos);
                let dist: f64 = pos.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum();
                if dist < best.0 {
                    best = (dist, self.arc_of[i] as usize);
                }
            }
            if best.0.is_finite() {
                return best.1;
            }
        }
        0
    }

    /// Arcs reachable from arc `a` moving away from node `via`.
    fn far_side(&self, a: usize, via: usize) -> Vec<usize> {
        let mut out = vec![a];
        let mut stack = vec![(a, via)];
        while let Some((arc, from)) = stack.pop() {
            let info = &self.arcs[arc];
            let next = if info.lo == from { info.hi } else { Some(info.lo) };
            if let Some(n) = next {
                for &b in self.nodes[n].up.iter().chain(&self.nodes[n].down) {
                    if b != arc {
                        out.push(b);
                        stack.push((b, n));
                    }
                }
            }
        }
        out
    }

    /// Among candidate arcs leaving node `via`, the one whose side of the tree
    /// holds the lattice vertices nearest to `y`.
    fn tie_break(&self, cands: &[usize], via: usize, y: &[f64]) -> usize {
        let sides: Vec<Vec<usize>> = cands.iter().map(|&c| self.far_side(c, via)).collect();
        let d = self.lattice.dim();
        let mut corners = Vec::new();
        self.lattice.cell_corners(y, &mut corners);
        let mut pos = vec![0.0; d];
        let mut best = (f64::INFINITY, cands[0]);
        let mut coords = vec![0; d];
        let mut visit = |i: usize, best: &mut (f64, usize)| {
            let a = self.arc_of[i];
            if a == NONE {
                return;
            }
            if let Some(k) = sides.iter().position(|s| s.contains(&(a as usize))) {
                self.lattice.position(i, &mut pos);
                let dist: f64 = pos.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum();
                if dist < best.0 {
                    *best = (dist, cands[k]);
                }
            }
        };
        for &c in &corners {
            visit(c, &mut best);
        }
        if !best.0.is_finite() {
            for &c in &corners {
                self.lattice.for_each_neighbor(c, &mut coords, |n| visit(n, &mut best));
            }
        }
        best.1
    }

    pub fn edge_on_arc(&self, arc: usize, z: f64) -> EdgeId {
        let list = &self.arc_edges[arc];
        let mut e = list[0].1;
        for &(z0, id) in list {
            if z >= z0 {
                e = id;
            } else {
                break;
            }
        }
        e
    }
}

impl ReebGraph {
    /// Edge whose preimage component contains `x`, with `z = H(x)`. Never
    /// snaps to vertices. Panics if the graph carries no projection.
    pub fn project_edge(&self, x: &[f64]) -> (EdgeId, f64) {
        let field = self.field.as_ref().expect("graph has no field");
        let z = field.value(x);
        (self.edge_at(x, z), z)
    }

    /// As [`Self::project_edge`] with `z` already known.
    pub fn edge_at(&self, x: &[f64], z: f64) -> EdgeId {
        let labels = self.labels.as_ref().expect("graph has no projection labels");
        let y = &x[labels.p_dim..];
        let arc = labels.locate_arc(y, z);
        labels.edge_on_arc(arc, z)
    }

    /// `Y(x)`; returns the vertex instead of the edge when `z` is within
    /// `vertex_tol` of an endpoint.
    pub fn project(&self, x: &[f64]) -> GraphPoint {
        let (e, z) = self.project_edge(x);
        let edge = &self.edges[e];
        for v in [edge.lower, edge.upper].into_iter().flatten() {
            if (self.vertices[v].z - z).abs() < self.vertex_tol {
                return GraphPoint {
                    location: Location::Vertex(v),
                    z,
                };
            }
        }
        GraphPoint::on_edge(e, z)
    }

    /// Axis-aligned box (in label space, i.e. `q` for separable graphs)
    /// containing the lattice vertices of `arcs` below level `z` on `edge`'s
    /// arc, widened by `margin` cells. `None` when no vertex qualifies.
    pub(crate) fn label_bbox(&self, edges: &[EdgeId], edge: EdgeId, z: f64, above: bool, margin: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let labels = self.labels.as_ref()?;
        let d = labels.lattice.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut pos = vec![0.0; d];
        let mut any = false;
        for (i, &a) in labels.arc_of.iter().enumerate() {
            if a == NONE {
                continue;
            }
            let v = labels.values[i];
            let e = labels.edge_on_arc(a as usize, v);
            let inside = if e == edge {
                if above {
                    v >= z
                } else {
                    v <= z
                }
            } else {
                edges.contains(&e)
            };
            if !inside {
                continue;
            }
            any = true;
            labels.lattice.position(i, &mut pos);
            for k in 0..d {
                lo[k] = lo[k].min(pos[k]);
                hi[k] = hi[k].max(pos[k]);
            }
        }
        if !any {
            return None;
        }
        for k in 0..d {
            lo[k] -= margin * labels.lattice.step[k];
            hi[k] += margin * labels.lattice.step[k];
        }
        Some((lo, hi))
    }

    /// Box in full coordinates around the lattice vertices of `edge` with
    /// values in `[z_lo, z_hi]`, widened by `margin` cells. Momenta of a
    /// separable graph get `|p| <= sqrt(2 (z_hi - min z))`.
    pub(crate) fn level_bbox(&self, edge: EdgeId, z_lo: f64, z_hi: f64, margin: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let labels = self.labels.as_ref()?;
        let field = self.field.as_ref()?;
        let d = labels.lattice.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut pos = vec![0.0; d];
        let mut any = false;
        for (i, &a) in labels.arc_of.iter().enumerate() {
            let v = labels.values[i];
            if a == NONE || v < z_lo || v > z_hi || labels.edge_on_arc(a as usize, v) != edge {
                continue;
            }
            any = true;
            labels.lattice.position(i, &mut pos);
            for k in 0..d {
                lo[k] = lo[k].min(pos[k]);
                hi[k] = hi[k].max(pos[k]);
            }
        }
        if !any {
            return None;
        }
        let p_dim = labels.p_dim;
        let zmin = self.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        let r = (2.0 * (z_hi - zmin).max(0.0)).sqrt();
        let mut full_lo = vec![-r; p_dim];
        let mut full_hi = vec![r; p_dim];
        for k in 0..d {
            full_lo.push(lo[k] - margin * labels.lattice.step[k]);
            full_hi.push(hi[k] + margin * labels.lattice.step[k]);
        }
        for i in 0..full_lo.len() {
            full_lo[i] = full_lo[i].max(field.bounds.lo[i]);
            full_hi[i] = full_hi[i].min(field.bounds.hi[i]);
        }
        Some((full_lo, full_hi))
    }

    pub(crate) fn label_p_dim(&self) -> usize {
        self.labels.as_ref().map_or(0, |l| l.p_dim)
    }

    pub(crate) fn label_step(&self) -> Option<Vec<f64>> {
        self.labels.as_ref().map(|l| l.lattice.step.clone())
    }
}
